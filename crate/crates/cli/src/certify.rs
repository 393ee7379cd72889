use anyhow::Result;
use kslab::Verdict;

use crate::config::RunConfig;
use crate::{Options, Setup, EXIT_INCONCLUSIVE, EXIT_OK};

/// Prints the certificate JSON to stdout; no simulation is run.
pub fn cmd_certify(config: &RunConfig, opts: &Options) -> Result<i32> {
    let setup = Setup::new(config, opts.flip_drift)?;
    let cert = setup.certificate(config)?;
    println!("{}", serde_json::to_string_pretty(&cert)?);
    if !opts.quiet {
        eprintln!("certify: {} (q = {})", cert.verdict.as_str(), cert.q);
    }
    Ok(match cert.verdict {
        Verdict::CertifiedBlowup => EXIT_OK,
        Verdict::Inconclusive => EXIT_INCONCLUSIVE,
    })
}
