//! Versioned actor snapshots shared between a trainer and inference.

use std::sync::{Arc, RwLock};

use crate::mlp::Mlp;

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySnapshot {
    pub version: u64,
    pub actor: Mlp,
}

/// Holds the current snapshot. Readers get an `Arc` to a complete parameter
/// set; a publish swaps the whole `Arc`.
#[derive(Debug, Clone)]
pub struct PolicyStore {
    inner: Arc<RwLock<Arc<PolicySnapshot>>>,
}

impl PolicyStore {
    pub fn new(snapshot: PolicySnapshot) -> Self {
        Self {
            inner: Arc::new(RwLock::new(Arc::new(snapshot))),
        }
    }

    pub fn load(&self) -> Arc<PolicySnapshot> {
        self.inner.read().expect("policy lock").clone()
    }

    pub fn version(&self) -> u64 {
        self.load().version
    }

    /// Installs `snapshot` if it is newer than the current one.
    pub fn publish(&self, snapshot: PolicySnapshot) -> bool {
        let mut guard = self.inner.write().expect("policy lock");
        if snapshot.version > guard.version {
            *guard = Arc::new(snapshot);
            true
        } else {
            false
        }
    }

    /// Whether both handles share the same underlying slot.
    pub fn same_store(&self, other: &PolicyStore) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
    }
}
