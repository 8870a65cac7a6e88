use std::collections::BTreeSet;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::store::{ItemId, StoreModel};
use super::WorldError;

pub const LIST_LENGTH: usize = 20;
pub const MAX_INSTANCES: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListEntry {
    pub item: ItemId,
    pub instances: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShoppingList {
    pub entries: Vec<ListEntry>,
}

impl ShoppingList {
    pub fn total_instances(&self) -> u32 {
        self.entries.iter().map(|e| e.instances).sum()
    }

    /// Checks the protocol invariants: 20 unique ids with 1 or 2 instances each.
    pub fn check_protocol(&self) -> Result<(), String> {
        if self.entries.len() != LIST_LENGTH {
            return Err(format!("list has {} entries", self.entries.len()));
        }
        let unique: BTreeSet<_> = self.entries.iter().map(|e| e.item).collect();
        if unique.len() != self.entries.len() {
            return Err("duplicate item ids".into());
        }
        if let Some(e) = self.entries.iter().find(|e| !(1..=MAX_INSTANCES).contains(&e.instances)) {
            return Err(format!("item {} requests {} instances", e.item, e.instances));
        }
        Ok(())
    }
}

/// Draws 20 distinct eligible items, each requested once or twice.
pub fn generate_shopping_list(store: &StoreModel, seed: u64) -> Result<ShoppingList, WorldError> {
    let eligible: Vec<ItemId> = store.items.iter().filter(|i| i.is_list_eligible()).map(|i| i.id).collect();
    if eligible.len() < LIST_LENGTH {
        return Err(WorldError::InsufficientCatalog { eligible: eligible.len(), required: LIST_LENGTH });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = index::sample(&mut rng, eligible.len(), LIST_LENGTH);
    let entries = picks
        .into_iter()
        .map(|k| ListEntry { item: eligible[k], instances: rng.random_range(1..=MAX_INSTANCES) })
        .collect();
    Ok(ShoppingList { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmodel::synthetic::{synthetic_store, SyntheticStoreParams};

    #[test]
    fn deterministic_per_seed() {
        let store = synthetic_store(&SyntheticStoreParams::default(), 1);
        let a = generate_shopping_list(&store, 7).unwrap();
        let b = generate_shopping_list(&store, 7).unwrap();
        assert_eq!(a, b);
        a.check_protocol().unwrap();
        assert_ne!(a, generate_shopping_list(&store, 8).unwrap());
        for e in &a.entries {
            assert!(store.item(e.item).unwrap().is_list_eligible());
        }
    }

    #[test]
    fn insufficient_catalog() {
        let mut store = synthetic_store(&SyntheticStoreParams::default(), 1);
        let keep: Vec<_> = store.items.iter().filter(|i| i.is_list_eligible()).take(19).cloned().collect();
        store.items = keep;
        assert!(matches!(
            generate_shopping_list(&store, 0),
            Err(WorldError::InsufficientCatalog { eligible: 19, .. })
        ));
    }
}
