//! Parameter counts of the two architectures at their working scale
//! (544-dim descriptors, 6890 template vertices), with the per-layer
//! breakdown.
//!
//!     cargo run --example param_count

use spiralcorr::model::{build_network, count_params, NetworkSpec};
use spiralcorr::rng::derive_rng;

fn main() {
    let mut rng = derive_rng(0, &[0]);
    for spec in [
        NetworkSpec::lstm_net(544, 30, 6890),
        NetworkSpec::fcs_net(544, 20, 6890),
    ] {
        let name = spec.kind.as_str();
        let seq_len = spec.seq_len;
        let network = build_network(spec, &mut rng);
        println!("== {name} (sequence length {seq_len})");
        for (layer, count) in network.layer_param_counts() {
            println!("  {layer:8} {count:>9}");
        }
        println!("  total    {:>9}", count_params(&network));
    }
}
