//! Minimal stderr logger gated by the `GALILAX_LOG` environment variable.
//!
//! Levels, most to least verbose: `debug`, `info`, `warn` (default),
//! `error`, `off`. Everything goes to stderr so stdout and output files
//! stay byte-deterministic.

use std::sync::OnceLock;

/// Verbosity threshold, ordered so that `Debug` admits everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Off,
    Error,
    Warn,
    Info,
    Debug,
}

impl Level {
    fn tag(self) -> &'static str {
        match self {
            Level::Off => "off",
            Level::Error => "error",
            Level::Warn => "warn",
            Level::Info => "info",
            Level::Debug => "debug",
        }
    }
}

static THRESHOLD: OnceLock<Level> = OnceLock::new();

fn threshold() -> Level {
    *THRESHOLD.get_or_init(|| {
        let raw = match std::env::var("GALILAX_LOG") {
            Ok(v) => v.to_ascii_lowercase(),
            Err(_) => return Level::Warn,
        };
        match raw.as_str() {
            "off" | "none" => Level::Off,
            "error" => Level::Error,
            "warn" => Level::Warn,
            "info" => Level::Info,
            "debug" | "trace" => Level::Debug,
            other => {
                eprintln!("[warn] unknown GALILAX_LOG level {other:?}, using \"warn\"");
                Level::Warn
            }
        }
    })
}

/// Forces threshold initialization so an invalid `GALILAX_LOG` value warns
/// exactly once at startup, independent of which command runs.
pub fn init() {
    let _ = threshold();
}

/// Whether a message at `level` would be emitted.
pub fn enabled(level: Level) -> bool {
    level <= threshold()
}

/// Emits one stderr line at `level` when the threshold admits it.
pub fn log(level: Level, msg: &str) {
    if enabled(level) {
        eprintln!("[{}] {msg}", level.tag());
    }
}

/// Info-level message.
pub fn info(msg: &str) {
    log(Level::Info, msg);
}

/// Debug-level message.
pub fn debug(msg: &str) {
    log(Level::Debug, msg);
}
