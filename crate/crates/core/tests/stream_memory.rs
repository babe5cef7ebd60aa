//! Peak heap use of the online solver while it consumes a generated stream.

use std::alloc::{GlobalAlloc, Layout, System};
use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ubauc::online::{consume_stream, OnlineConfig, OnlineState};
use ubauc::{Example, Objective, SparseVector};

struct Counting;

thread_local! {
    static LIVE: Cell<isize> = const { Cell::new(0) };
    static PEAK: Cell<isize> = const { Cell::new(0) };
}

fn record(delta: isize) {
    let _ = LIVE.try_with(|live| {
        let now = live.get() + delta;
        live.set(now);
        let _ = PEAK.try_with(|p| p.set(p.get().max(now)));
    });
}

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        record(layout.size() as isize);
        unsafe { System.alloc(layout) }
    }
    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        record(-(layout.size() as isize));
        unsafe { System.dealloc(ptr, layout) }
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

/// Bytes allocated at the high-water mark of `f`, above the level at entry.
fn peak_during(f: impl FnOnce()) -> isize {
    let base = LIVE.with(|l| l.get());
    PEAK.with(|p| p.set(base));
    f();
    PEAK.with(|p| p.get()) - base
}

fn stream(n: usize, dim: usize, seed: u64) -> impl Iterator<Item = Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(move |i| {
        let dense: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        Example {
            features: SparseVector::from_dense(&dense),
            label: if i % 2 == 0 { 1 } else { -1 },
        }
    })
}

#[test]
fn peak_memory_does_not_grow_with_stream_length() {
    let dim = 50;
    let cfg = OnlineConfig::new(Objective::new(1.0, 1e-3), 0.05, 1, 0);
    let mut peaks = Vec::new();
    for n in [1_000, 100_000] {
        let mut state = OnlineState::new(dim);
        let bytes_before = state.aux_bytes();
        let peak = peak_during(|| {
            assert_eq!(consume_stream(&mut state, stream(n, dim, 7), &cfg).unwrap(), n as u64);
        });
        assert_eq!(state.aux_bytes(), bytes_before);
        assert!(state.model().is_finite());
        peaks.push(peak);
    }
    let (small, large) = (peaks[0] as f64, peaks[1] as f64);
    assert!(small > 0.0);
    assert!((large - small).abs() <= 0.1 * small, "peak {small} B at 1e3 vs {large} B at 1e5");
}
