//! The three feature maps a GAP forest can be trained on.

use gap_impute::synthetic::{generate, Family, SyntheticSpec};
use gap_impute::transforms::{generate_kernels, summary_stats, Transform, TransformKind};

fn main() -> gap_impute::Result<()> {
    let ds = generate(&SyntheticSpec {
        family: Family::Sines,
        n: 10,
        t: 32,
        noise: 0.1,
        seed: 4,
    })?;
    for kind in [TransformKind::Raw, TransformKind::Summary, TransformKind::Kernels] {
        let transform = Transform::fit(kind, &ds, 50, 9)?;
        let m = transform.apply(&ds)?;
        println!("{kind:?}: {} rows x {} columns", m.rows, m.cols);
    }

    let series: Vec<f64> = (0..32).map(|t| ds.get(0, 0, t).unwrap()).collect();
    println!("summary of series 0: {:.3?}", summary_stats(&series));

    // The bank is a pure function of (length, count, seed) and serializes to JSON.
    let bank = generate_kernels(32, 4, 9)?;
    for k in &bank.kernels {
        let (ppv, max) = k.features(&series);
        println!("kernel len {} dilation {:2}: ppv {ppv:.3} max {max:.3}", k.weights.len(), k.dilation);
    }
    println!("{} bytes of JSON", bank.to_json()?.len());
    Ok(())
}
