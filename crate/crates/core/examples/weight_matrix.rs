//! Random regular graph, its uniform-weight mixing matrix and the spectral
//! certificate under both bands.

use truthful_agg::harness::validate_graph;
use truthful_agg::network::{build_weight_matrix, generate_k_regular, SpectralBand, Topology};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let topology = generate_k_regular(20, 4, 3)?;
    println!("{} agents, {} edges, connected: {}", topology.len(), topology.edges().len(), topology.is_connected());

    let w = build_weight_matrix(&topology, 0.2, SpectralBand::Contractive)?;
    let cert = w.certificate();
    println!("delta_2 = {:.4}, delta_min = {:.4}, w_hat = {}", cert.delta2, cert.delta_min, w.w_hat());

    match build_weight_matrix(&topology, 0.2, SpectralBand::Strict) {
        Ok(_) => println!("strict band accepted"),
        Err(e) => println!("strict band rejected: {e}"),
    }

    let ring = Topology::ring(8);
    print!("{}", validate_graph(&ring, 0.25, SpectralBand::Strict));

    let mut edges = Vec::new();
    topology.write_edge_list(&mut edges)?;
    println!("edge list head:\n{}", String::from_utf8(edges)?.lines().take(4).collect::<Vec<_>>().join("\n"));
    Ok(())
}
