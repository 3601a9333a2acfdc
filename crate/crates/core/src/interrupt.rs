//! Process-wide cooperative cancellation. Long runs poll [`requested`] once
//! per iteration and return what they have so far.

use std::sync::atomic::{AtomicBool, Ordering};

static FLAG: AtomicBool = AtomicBool::new(false);

pub fn request() {
    FLAG.store(true, Ordering::SeqCst);
}

pub fn requested() -> bool {
    FLAG.load(Ordering::Relaxed)
}

pub fn reset() {
    FLAG.store(false, Ordering::SeqCst);
}

/// Routes Ctrl-C to [`request`]. A second Ctrl-C is not special-cased; runs
/// finish their current iteration and flush partial results.
pub fn install_ctrlc_handler() -> crate::Result<()> {
    ctrlc::set_handler(request).map_err(|e| crate::Error::Config(format!("cannot install signal handler: {e}")))
}
