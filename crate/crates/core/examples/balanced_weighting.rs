//! Static loss weights versus balanced weighting on one set of loss values.
//!
//! ```sh
//! cargo run --example balanced_weighting
//! ```

use dense_points::weighting::{
    bws_backprop_scale, combine_bws, combine_static, BwsConfig, StaticWeightTable, TaskGroup,
};

fn main() -> dense_points::Result<()> {
    let table = StaticWeightTable::default();
    // a surface regression term that has blown up next to healthy ones
    let values = [
        ("rpn_cls", 0.08),
        ("rpn_reg", 0.05),
        ("rcnn_cls", 0.30),
        ("rcnn_reg", 0.20),
        ("ann", 0.40),
        ("i", 1.20),
        ("u", 9.00),
        ("v", 0.60),
    ];
    let terms = table.terms(&values)?;

    let fixed = combine_static(&terms, 1.0)?;
    let cfg = BwsConfig::default();
    let balanced = combine_bws(&terms, &cfg)?;
    let attached = bws_backprop_scale(
        &terms,
        &BwsConfig {
            detach_weights: false,
            ..cfg
        },
    )?;

    println!(
        "{:<9} {:>6} {:>8} {:>8} {:>10}",
        "term", "loss", "static", "bws", "bws d/dL"
    );
    for (i, (name, value)) in values.iter().enumerate() {
        println!(
            "{:<9} {:>6.2} {:>8.3} {:>8.3} {:>10.3}",
            name, value, fixed.per_term_weights[i].1, balanced.per_term_weights[i].1, attached[i].1
        );
    }
    for g in TaskGroup::ALL {
        println!(
            "{:<10} subtotal: static {:.3}, bws {:.3}",
            g.name(),
            fixed.subtotal(g),
            balanced.subtotal(g)
        );
    }
    println!(
        "total: static {:.3}, bws {:.3}",
        fixed.total, balanced.total
    );
    Ok(())
}
