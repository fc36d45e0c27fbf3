use std::time::Instant;

use anyhow::{bail, Result};
use clap::Args;
use mrnn::training::{gradient_check, GradCheckConfig};

use crate::VariantArg;

#[derive(Args, Debug)]
pub struct GradcheckArgs {
    /// Random tiny models to check.
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = VariantArg::Mrnn)]
    variant: VariantArg,
    /// Distort one block's analytic gradient (negative control), e.g. `U_r`.
    #[arg(long)]
    corrupt_block: Option<String>,
}

pub fn run(args: GradcheckArgs) -> Result<()> {
    let cfg = GradCheckConfig {
        samples: args.samples,
        seed: args.seed,
        variant: args.variant.into(),
        corrupt_block: args.corrupt_block,
        ..GradCheckConfig::default()
    };
    let start = Instant::now();
    let report = gradient_check(&cfg)?;
    let names: Vec<&str> = report.instances[0].blocks.iter().map(|b| b.block).collect();
    println!("block\tmax_rel_error\tmax_abs_error");
    for (i, name) in names.iter().enumerate() {
        let rel = report.instances.iter().map(|r| r.blocks[i].max_rel_error).fold(0.0, f64::max);
        let abs = report.instances.iter().map(|r| r.blocks[i].max_abs_error).fold(0.0, f64::max);
        println!("{name}\t{rel:.3e}\t{abs:.3e}");
    }
    let resamples: usize = report.instances.iter().map(|r| r.resamples).sum();
    let (instance, worst) = report.worst().expect("at least one instance");
    eprintln!("checked in {:.2}s", start.elapsed().as_secs_f64());
    println!(
        "{} instances ({} kink resamples): max relative error {:.3e} in block {} (instance {})",
        report.instances.len(),
        resamples,
        worst.max_rel_error,
        worst.block,
        instance
    );
    if !report.passed() {
        bail!(
            "gradient check failed: block {} relative error {:.3e} exceeds {:.0e}",
            worst.block,
            worst.max_rel_error,
            report.tolerance
        );
    }
    println!("PASS");
    Ok(())
}
