//! Structural identities of the master equation and the log-det convergence order.

use detangle::experiments::{logdet_convergence, run_identities};

fn main() -> detangle::Result<()> {
    let seed = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(7);
    for check in run_identities(seed)? {
        let mark = if check.passed { "ok" } else { "FAILED" };
        println!("{:<28} {:>10.3e} <= {:>8.1e}  {mark}", check.name, check.value, check.tolerance);
    }
    let conv = logdet_convergence(seed)?;
    for (k, r) in conv.strides.iter().zip(&conv.residuals) {
        println!("stride {k}: residual {r:.3e}");
    }
    println!("observed order {:.3}", conv.order);
    Ok(())
}
