//! Minimal feed-forward numeric core for the xApp Q-networks.

pub mod io;
mod layout;
mod loss;
mod qnet;

pub use layout::{ControlSet, HeadLayout, HeadRole, HeadSpec};
pub use loss::{kl_loss, log_softmax_temp, softmax_temp};
pub use qnet::{Dense, ForwardPass, Gradients, LayerSpec, QNet, SampleGrad};

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
