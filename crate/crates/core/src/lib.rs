//! Privacy-preserving socialized recommendation, end to end: multi-view NMF
//! clustering of items, a composite social similarity between users, and a
//! two-party Paillier protocol in which a recommender (Alice) and a social
//! network provider (Bob) jointly rank candidate items without Alice learning
//! similarity scores or Bob learning ratings and item identities.
//!
//! The crate is `no_std` (with `alloc`); file formats, dataset loaders, the
//! socket transport, and the CLI live in the companion `ppsr` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod baselines;
pub mod metrics;
pub mod nmf;
pub mod paillier;
pub mod protocol;
pub mod similarity;
pub mod synth;
