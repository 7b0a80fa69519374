//! File formats, reports and the command-line front end for
//! [`constmoran_core`].

pub mod cli;
pub mod io;
pub mod report;

pub use io::{load_dataset, Dataset, DataError, GridSpec, Topology};

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "CONSTMORAN_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`], if set.
pub fn configure_threads() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .map_err(|_| anyhow::anyhow!("{THREADS_ENV} must be a positive integer, got `{raw}`"))?;
    if threads == 0 {
        anyhow::bail!("{THREADS_ENV} must be a positive integer, got `{raw}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}
