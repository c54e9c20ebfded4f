//! Small shared helpers.

/// Wall-clock start marker. Bare wasm has no monotonic clock, so timing
/// degrades to zero there instead of panicking.
#[cfg(not(target_arch = "wasm32"))]
pub(crate) fn clock() -> std::time::Instant {
    std::time::Instant::now()
}

#[cfg(not(target_arch = "wasm32"))]
pub(crate) fn seconds_since(start: std::time::Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

#[cfg(target_arch = "wasm32")]
pub(crate) fn clock() {}

#[cfg(target_arch = "wasm32")]
pub(crate) fn seconds_since(_start: ()) -> f64 {
    0.0
}
