use std::sync::Arc;

use parking_lot::Mutex;

use super::ParamBlob;
use crate::error::{invalid, Result};

/// Monotone push counter; `Version(0)` means nothing was pushed yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Version(pub u64);

impl std::fmt::Display for Version {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Single-slot, last-writer-wins parameter store.
///
/// The lock guards only a pointer swap, so a pull waits at most for one
/// in-flight push.
#[derive(Debug, Default)]
pub struct ParamServer {
    slot: Mutex<(Option<Arc<ParamBlob>>, Version)>,
}

impl ParamServer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, blob: ParamBlob) -> Result<Version> {
        if !blob.verify() {
            return Err(invalid("refusing a blob whose checksum does not match"));
        }
        let blob = Arc::new(blob);
        let mut slot = self.slot.lock();
        let version = Version(slot.1 .0 + 1);
        *slot = (Some(blob), version);
        Ok(version)
    }

    pub fn pull(&self) -> Option<(Arc<ParamBlob>, Version)> {
        let slot = self.slot.lock();
        slot.0.as_ref().map(|b| (Arc::clone(b), slot.1))
    }

    pub fn version(&self) -> Version {
        self.slot.lock().1
    }
}
