//! Run instrumentation: wall-clock stage timing, best-effort peak-memory
//! readings, and construction counters.
//!
//! Memory comes from two optional sources. [`TrackingAllocator`] is a
//! global-allocator wrapper a binary can install to get exact live-byte
//! peaks that can be reset between measurements; without it, the recorder
//! falls back to the kernel's high-water mark from `/proc/self/status`,
//! which only ever grows. Both readings are best effort and may be absent.

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

static ALLOC_CURRENT: AtomicUsize = AtomicUsize::new(0);
static ALLOC_PEAK: AtomicUsize = AtomicUsize::new(0);

/// Wraps the system allocator and tracks live bytes and their peak.
/// Install in a binary with:
///
/// ```ignore
/// #[global_allocator]
/// static ALLOC: mshtm::instrument::TrackingAllocator = mshtm::instrument::TrackingAllocator;
/// ```
pub struct TrackingAllocator;

fn on_alloc(size: usize) {
    let current = ALLOC_CURRENT.fetch_add(size, Ordering::Relaxed) + size;
    ALLOC_PEAK.fetch_max(current, Ordering::Relaxed);
}

fn on_dealloc(size: usize) {
    ALLOC_CURRENT.fetch_sub(size, Ordering::Relaxed);
}

unsafe impl GlobalAlloc for TrackingAllocator {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc(layout);
        if !ptr.is_null() {
            on_alloc(layout.size());
        }
        ptr
    }

    unsafe fn alloc_zeroed(&self, layout: Layout) -> *mut u8 {
        let ptr = System.alloc_zeroed(layout);
        if !ptr.is_null() {
            on_alloc(layout.size());
        }
        ptr
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout);
        on_dealloc(layout.size());
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        let new_ptr = System.realloc(ptr, layout, new_size);
        if !new_ptr.is_null() {
            on_dealloc(layout.size());
            on_alloc(new_size);
        }
        new_ptr
    }
}

/// True if the tracking allocator is (very likely) installed: anything on
/// the heap makes the live count nonzero.
pub fn tracking_allocator_installed() -> bool {
    ALLOC_CURRENT.load(Ordering::Relaxed) > 0
}

pub fn alloc_current_bytes() -> usize {
    ALLOC_CURRENT.load(Ordering::Relaxed)
}

pub fn alloc_peak_bytes() -> usize {
    ALLOC_PEAK.load(Ordering::Relaxed)
}

/// Resets the peak to the current live count so a fresh high-water mark can
/// be measured.
pub fn alloc_reset_peak() {
    ALLOC_PEAK.store(ALLOC_CURRENT.load(Ordering::Relaxed), Ordering::Relaxed);
}

fn read_proc_status_kb(field: &str) -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix(field) {
            let rest = rest.trim_start_matches(':').trim();
            let kb: u64 = rest.split_whitespace().next()?.parse().ok()?;
            return Some(kb);
        }
    }
    None
}

/// Kernel-reported peak resident set size, if the platform exposes it.
pub fn peak_rss_kb() -> Option<u64> {
    read_proc_status_kb("VmHWM")
}

static EMBEDDER_BUILDS: AtomicUsize = AtomicUsize::new(0);
static CLUSTER_CONFIG_BUILDS: AtomicUsize = AtomicUsize::new(0);

/// Process-wide construction counters, used to assert that per-run
/// resources are built once and then shared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCounters {
    pub embedder_builds: usize,
    pub cluster_config_builds: usize,
}

pub fn record_embedder_build() {
    EMBEDDER_BUILDS.fetch_add(1, Ordering::Relaxed);
}

pub fn record_cluster_config_build() {
    CLUSTER_CONFIG_BUILDS.fetch_add(1, Ordering::Relaxed);
}

pub fn build_counters() -> BuildCounters {
    BuildCounters {
        embedder_builds: EMBEDDER_BUILDS.load(Ordering::Relaxed),
        cluster_config_builds: CLUSTER_CONFIG_BUILDS.load(Ordering::Relaxed),
    }
}

impl BuildCounters {
    /// Counter increments between two snapshots.
    pub fn delta_since(&self, earlier: &BuildCounters) -> BuildCounters {
        BuildCounters {
            embedder_builds: self.embedder_builds - earlier.embedder_builds,
            cluster_config_builds: self.cluster_config_builds - earlier.cluster_config_builds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub name: String,
    pub wall_ms: f64,
    /// Peak live heap bytes during the stage, when the tracking allocator
    /// is installed.
    pub alloc_peak_bytes: Option<u64>,
    /// Process high-water mark after the stage, when `/proc` is available.
    pub vm_hwm_kb: Option<u64>,
}

/// Sequential per-stage timing built from a monotone clock.
#[derive(Debug, Default)]
pub struct StageRecorder {
    pub stages: Vec<StageMetrics>,
}

impl StageRecorder {
    pub fn new() -> Self {
        StageRecorder::default()
    }

    /// Runs `f`, recording its wall time and memory readings under `name`.
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let tracking = tracking_allocator_installed();
        let start_live = alloc_current_bytes();
        if tracking {
            alloc_reset_peak();
        }
        let start = Instant::now();
        let result = f();
        let wall_ms = start.elapsed().as_secs_f64() * 1000.0;
        let alloc_peak = if tracking {
            Some(alloc_peak_bytes().saturating_sub(start_live) as u64)
        } else {
            None
        };
        self.stages.push(StageMetrics {
            name: name.to_string(),
            wall_ms,
            alloc_peak_bytes: alloc_peak,
            vm_hwm_kb: peak_rss_kb(),
        });
        result
    }

    pub fn total_wall_ms(&self) -> f64 {
        self.stages.iter().map(|s| s.wall_ms).sum()
    }
}
