//! MCAR, MAR and MNAR corruption with their removal logs.

use gap_impute::missingness::{corrupt, quartile_independence_p, CorruptionSpec, Mechanism};
use gap_impute::synthetic::{generate, Family, SyntheticSpec};

fn main() -> gap_impute::Result<()> {
    let ds = generate(&SyntheticSpec {
        family: Family::Sines,
        n: 50,
        t: 60,
        noise: 0.2,
        seed: 3,
    })?;
    for mechanism in [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar] {
        let spec = CorruptionSpec::new(mechanism, 0.25, 11);
        let (corrupted, log) = corrupt(&ds, &spec)?;
        let mean_removed = log.removals.iter().map(|r| r.true_value).sum::<f64>() / log.len() as f64;
        println!(
            "{:>4}: removed {:4} of {} (rate {:.3}, q {:.3}), mean removed value {:+.3}, quartile p {:.3}",
            mechanism.name(),
            log.len(),
            log.total,
            log.realized_rate(),
            log.removal_probability,
            mean_removed,
            quartile_independence_p(&ds, &log)?,
        );
        assert_eq!(log.restore(&corrupted)?, ds);
    }

    // MNAR removes only values above the series' own 75th percentile.
    let (_, log) = corrupt(&ds, &CorruptionSpec::new(Mechanism::Mnar, 0.1, 0))?;
    let r = &log.removals[0];
    println!("first MNAR removal: value {:.3} > threshold {:.3}", r.true_value, r.threshold.unwrap());
    Ok(())
}
