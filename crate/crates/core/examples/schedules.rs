//! Schedule presets and the Laplace sampler.

use truthful_agg::rng::{NoiseTag, StreamKey};
use truthful_agg::schedules::{sample_laplace_vector, ScheduleSet, PRESET_NAMES};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for name in PRESET_NAMES {
        let p = ScheduleSet::preset(name)?.params();
        println!(
            "{name:>17}: u={} v={} w1={} w2={} noise exponents {} / {}",
            p.u, p.v, p.w1, p.w2, p.varsigma_zeta, p.varsigma_xi
        );
    }

    let s = ScheduleSet::preset("sec5-convergence")?;
    for t in [0, 10, 100, 1_000] {
        println!(
            "t={t:>5}: lambda={:.3e} gamma1={:.3e} laplace scale (xi)={:.3e}",
            s.lambda.value(t),
            s.gamma1.value(t),
            s.noise.laplace_scale(NoiseTag::Xi, 0, t)
        );
    }

    // Same key, same draw.
    let key = StreamKey::noise(5, 3, 42, NoiseTag::Zeta);
    let a = sample_laplace_vector(1.0, 4, &mut key.rng())?;
    let b = sample_laplace_vector(1.0, 4, &mut key.rng())?;
    assert_eq!(a, b);
    let n = 100_000;
    let draws = sample_laplace_vector(2.0, n, &mut StreamKey::noise(5, 0, 0, NoiseTag::Xi).rng())?;
    let var = draws.iter().map(|v| v * v).sum::<f64>() / n as f64;
    println!("Laplace(2) sample variance {var:.3} (expected 8)");
    Ok(())
}
