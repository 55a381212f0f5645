//! LBP codes and the uniform-pattern histogram of one enrolled face, and a
//! check that a strictly increasing tone map leaves the feature unchanged.
//!
//!     cargo run --release --example lbp [image]

use doorwatch::recognition::{lbp_code, lbp_feature, normalize_face, uniform_mapping, LbpParams};
use doorwatch::vision::{to_grayscale, FaceDetector, Frame};

fn main() -> anyhow::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| {
        let corpus = concat!(env!("CARGO_MANIFEST_DIR"), "/assets/corpus");
        let labels = std::fs::read_to_string(format!("{corpus}/labels.tsv")).expect("labels.tsv");
        let first = labels.lines().nth(1).expect("a labeled image").split('\t').next().unwrap().to_string();
        format!("{corpus}/{first}")
    });
    let gray = to_grayscale(&Frame::load(&path, "x", 0)?);
    let face = *FaceDetector::bundled()
        .detect(&gray)
        .first()
        .ok_or_else(|| anyhow::anyhow!("no face in {path}"))?;
    let params = LbpParams::default();
    let crop = normalize_face(&gray, &face, params.face_size)?;

    let mapping = uniform_mapping(params.points)?;
    println!(
        "P={} R={}: {} uniform patterns, {} bins per cell, feature dimension {}",
        params.points,
        params.radius,
        mapping.bins() - 1,
        mapping.bins(),
        params.dimension()?
    );
    print!("codes along the middle row:");
    for x in (8..120).step_by(16) {
        let c = lbp_code(&crop, x, 64, &params)?;
        print!(" {c:08b}{}", if mapping.is_uniform(c) { "" } else { "*" });
    }
    println!("  (* = non-uniform)");

    let feature = lbp_feature(&crop, &params)?;
    println!("face {face:?} -> {} values, L1 norm {:.1}", feature.len(), feature.l1_norm());

    // a strictly increasing u8 map needs headroom, so work on a 7-bit copy
    let half = crop.map(|v| v / 2);
    let curve = |u: u8| (u as u32 + (u as u32 * u as u32) / 255) as u8;
    let monotone = (1..128u8).all(|u| curve(u) > curve(u - 1));
    let same = lbp_feature(&half, &params)? == lbp_feature(&half.map(curve), &params)?;
    println!("tone map strictly increasing: {monotone}; features identical: {same}");
    Ok(())
}
