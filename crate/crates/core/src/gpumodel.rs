//! The simulated device: resource limits, launch descriptions, traffic
//! counters, the theoretical-occupancy calculator, and coalescing analysis.
//!
//! Nothing here models time. Strategies execute block by block against
//! these limits and report how much memory they touched, how often they
//! synchronized, and how well their warp accesses coalesced. Counters
//! measure whole 32-byte particle records (all eight values move together);
//! coalescing is analyzed on the position-x array as a representative
//! stream, since per-field analysis would multiply every count by eight and
//! add nothing.

use crate::error::{Error, Result};
use crate::launchcfg::{PencilConfig, SubBoxConfig};
use crate::particles::VALUES_PER_PARTICLE;
use serde::{Deserialize, Serialize};
use std::ops::AddAssign;
use std::path::Path;

/// Resource limits of a simulated device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviceProfile {
    pub warp_size: usize,
    pub shared_mem_per_block: usize,
    pub shared_mem_per_sm: usize,
    pub max_threads_per_block: usize,
    pub max_threads_per_sm: usize,
    pub max_blocks_per_sm: usize,
    pub num_sms: usize,
    pub transaction_bytes: usize,
    pub bytes_per_particle: usize,
}

impl DeviceProfile {
    /// 48KB shared memory, 40 multiprocessors.
    pub fn t600() -> Self {
        Self {
            warp_size: 32,
            shared_mem_per_block: 49152,
            shared_mem_per_sm: 49152,
            max_threads_per_block: 1024,
            max_threads_per_sm: 1024,
            max_blocks_per_sm: 16,
            num_sms: 40,
            transaction_bytes: 128,
            bytes_per_particle: 4 * VALUES_PER_PARTICLE,
        }
    }

    /// 48KB shared memory per block, 108 multiprocessors.
    pub fn a100() -> Self {
        Self {
            warp_size: 32,
            shared_mem_per_block: 49152,
            shared_mem_per_sm: 167936,
            max_threads_per_block: 1024,
            max_threads_per_sm: 2048,
            max_blocks_per_sm: 32,
            num_sms: 108,
            transaction_bytes: 128,
            bytes_per_particle: 4 * VALUES_PER_PARTICLE,
        }
    }

    /// 64KB shared memory, 104 compute units, 64-lane wavefronts.
    pub fn mi210() -> Self {
        Self {
            warp_size: 64,
            shared_mem_per_block: 65536,
            shared_mem_per_sm: 65536,
            max_threads_per_block: 1024,
            max_threads_per_sm: 2048,
            max_blocks_per_sm: 16,
            num_sms: 104,
            transaction_bytes: 128,
            bytes_per_particle: 4 * VALUES_PER_PARTICLE,
        }
    }

    /// Resolve a preset name or load a JSON profile file.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match name_or_path {
            "t600" => Ok(Self::t600()),
            "a100" => Ok(Self::a100()),
            "mi210" => Ok(Self::mi210()),
            other => {
                let path = Path::new(other);
                if path.exists() {
                    Self::from_file(path)
                } else {
                    Err(Error::UnknownProfile(other.to_string()))
                }
            }
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let profile: DeviceProfile = serde_json::from_str(&text)?;
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("warp_size", self.warp_size),
            ("shared_mem_per_block", self.shared_mem_per_block),
            ("shared_mem_per_sm", self.shared_mem_per_sm),
            ("max_threads_per_block", self.max_threads_per_block),
            ("max_threads_per_sm", self.max_threads_per_sm),
            ("max_blocks_per_sm", self.max_blocks_per_sm),
            ("num_sms", self.num_sms),
            ("transaction_bytes", self.transaction_bytes),
            ("bytes_per_particle", self.bytes_per_particle),
        ];
        for (name, v) in fields {
            if v == 0 {
                return Err(Error::ConfigInvalid(format!("{name} must be positive")));
            }
        }
        if self.max_threads_per_block % self.warp_size != 0 {
            return Err(Error::ConfigInvalid(format!(
                "warp_size {} must divide max_threads_per_block {}",
                self.warp_size, self.max_threads_per_block
            )));
        }
        Ok(())
    }
}

/// Per-strategy geometry attached to a launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StrategyParams {
    None,
    SubBox(SubBoxConfig),
    Pencil(PencilConfig),
}

/// Grid/block/shared-memory configuration of one kernel launch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LaunchConfig {
    pub blocks: usize,
    pub threads_per_block: usize,
    pub dynamic_shared_bytes: usize,
    pub strategy_params: StrategyParams,
}

impl LaunchConfig {
    pub fn simple(blocks: usize, threads_per_block: usize) -> Self {
        Self {
            blocks,
            threads_per_block,
            dynamic_shared_bytes: 0,
            strategy_params: StrategyParams::None,
        }
    }

    pub fn validate(&self, profile: &DeviceProfile) -> Result<()> {
        if self.threads_per_block == 0 || self.threads_per_block > profile.max_threads_per_block {
            return Err(Error::ConfigInvalid(format!(
                "threads_per_block {} outside (0, {}]",
                self.threads_per_block, profile.max_threads_per_block
            )));
        }
        if self.dynamic_shared_bytes > profile.shared_mem_per_block {
            return Err(Error::ConfigInvalid(format!(
                "dynamic shared {}B exceeds per-block limit {}B",
                self.dynamic_shared_bytes, profile.shared_mem_per_block
            )));
        }
        Ok(())
    }
}

/// Memory-traffic and execution counters. Units are whole particle records
/// for loads/stores; aggregation over blocks is plain addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TrafficCounters {
    pub global_particle_loads: u64,
    pub global_particle_stores: u64,
    pub shared_loads: u64,
    pub shared_stores: u64,
    pub sync_count: u64,
    pub interactions: u64,
    pub idle_lane_iterations: u64,
    pub global_transactions: u64,
}

impl AddAssign for TrafficCounters {
    fn add_assign(&mut self, rhs: Self) {
        self.global_particle_loads += rhs.global_particle_loads;
        self.global_particle_stores += rhs.global_particle_stores;
        self.shared_loads += rhs.shared_loads;
        self.shared_stores += rhs.shared_stores;
        self.sync_count += rhs.sync_count;
        self.interactions += rhs.interactions;
        self.idle_lane_iterations += rhs.idle_lane_iterations;
        self.global_transactions += rhs.global_transactions;
    }
}

/// Resource-limited blocks per multiprocessor and the occupancy fraction.
///
/// `blocks_per_sm` is the minimum of the shared-memory, thread, and
/// block-count limits; occupancy is resident threads over the SM thread
/// capacity, clamped to 1.
pub fn theoretical_occupancy(
    profile: &DeviceProfile,
    launch: &LaunchConfig,
) -> Result<(usize, f64)> {
    launch.validate(profile)?;
    let shared_limit = profile.shared_mem_per_sm / launch.dynamic_shared_bytes.max(1);
    let thread_limit = profile.max_threads_per_sm / launch.threads_per_block;
    let blocks_per_sm = shared_limit.min(thread_limit).min(profile.max_blocks_per_sm);
    let occupancy = ((blocks_per_sm * launch.threads_per_block) as f64
        / profile.max_threads_per_sm as f64)
        .min(1.0);
    Ok((blocks_per_sm, occupancy))
}

/// Number of distinct aligned `transaction_bytes`-sized segments covering a
/// warp's byte addresses. Inactive lanes are simply omitted from the list.
pub fn coalesced_transactions(byte_addresses: &[u64], transaction_bytes: usize) -> u64 {
    assert!(transaction_bytes > 0);
    let tb = transaction_bytes as u64;
    let mut segments: Vec<u64> = byte_addresses.iter().map(|&a| a / tb).collect();
    segments.sort_unstable();
    segments.dedup();
    segments.len() as u64
}

/// Streaming transaction counter for one strategy run.
///
/// Strategies feed it the sorted-array indices each warp touches per lockstep
/// access; it reduces them to aligned-segment counts on the 4-byte
/// position-x stream.
#[derive(Debug, Clone)]
pub struct TransactionCounter {
    transaction_bytes: u64,
    warp_size: usize,
    pub total: u64,
}

impl TransactionCounter {
    pub fn new(profile: &DeviceProfile) -> Self {
        Self {
            transaction_bytes: profile.transaction_bytes as u64,
            warp_size: profile.warp_size,
            total: 0,
        }
    }

    #[inline]
    fn segment(&self, index: usize) -> u64 {
        index as u64 * 4 / self.transaction_bytes
    }

    /// A full set of lanes reading consecutive records starting at `base`
    /// (e.g. a staging copy). Splits into warps internally.
    pub fn contiguous(&mut self, base: usize, len: usize) {
        let mut start = base;
        let end = base + len;
        while start < end {
            let warp_end = (start + self.warp_size).min(end);
            self.total += self.segment(warp_end - 1) - self.segment(start) + 1;
            start = warp_end;
        }
    }

    /// All active lanes of a warp read the same record (a broadcast).
    pub fn broadcast(&mut self) {
        self.total += 1;
    }

    /// One warp's lanes read the given records in lockstep (arbitrary
    /// addresses; at most `warp_size` entries).
    pub fn warp_gather(&mut self, indices: &[usize]) {
        debug_assert!(indices.len() <= self.warp_size);
        // Tiny dedup without allocation; warps are at most 64 lanes.
        let mut segs = [u64::MAX; 64];
        let mut count = 0usize;
        for &i in indices {
            let s = self.segment(i);
            if !segs[..count].contains(&s) {
                segs[count] = s;
                count += 1;
            }
        }
        self.total += count as u64;
    }
}
