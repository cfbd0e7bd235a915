//! Tiny leveled logger driven by the JSCC_LOG_LEVEL environment variable
//! (error | info | debug; default info). Messages go to stderr so stdout
//! stays machine-readable.

use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Level {
    Error = 0,
    Info = 1,
    Debug = 2,
}

pub fn level() -> Level {
    static LEVEL: OnceLock<Level> = OnceLock::new();
    *LEVEL.get_or_init(|| match std::env::var("JSCC_LOG_LEVEL").as_deref() {
        Ok("error") => Level::Error,
        Ok("debug") => Level::Debug,
        _ => Level::Info,
    })
}

pub fn info(msg: impl AsRef<str>) {
    if level() >= Level::Info {
        eprintln!("[jscc] {}", msg.as_ref());
    }
}

pub fn debug(msg: impl AsRef<str>) {
    if level() >= Level::Debug {
        eprintln!("[jscc:debug] {}", msg.as_ref());
    }
}

pub fn error(msg: impl AsRef<str>) {
    eprintln!("[jscc:error] {}", msg.as_ref());
}
