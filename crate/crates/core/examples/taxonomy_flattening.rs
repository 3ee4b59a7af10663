//! Parses an edge list and shows the fixed-level flattening baselines next
//! to a hand-picked removal set.

use std::collections::BTreeSet;

use taxoflat::taxonomy::{FlatteningPlan, Taxonomy};

const EDGES: &str = "\
# parent child
0 1
0 2
1 3
1 4
3 7
3 8
4 9
2 5
2 6
5 10
10 11
10 12
";

fn show(name: &str, t: &Taxonomy) {
    println!("{name}: {} nodes, depth {}, fan-out per level {:?}", t.len(), t.depth(), t.fanout_profile());
    for (p, c) in t.edges() {
        print!(" {p}->{c}");
    }
    println!();
}

fn main() -> taxoflat::error::Result<()> {
    let tax = Taxonomy::parse(EDGES)?;
    show("original", &tax);
    println!("leaves {:?}, path to 9 {:?}", tax.leaves(), tax.path_from_root(9)?);

    show("TLF", &tax.flatten(&tax.tlf_plan()?)?);
    show("BLF", &tax.flatten(&tax.blf_plan()?)?);
    show("MLF", &tax.flatten(&tax.mlf_plan()?)?);

    // removing a node and its parent in one batch cascades to the grandparent
    let plan = FlatteningPlan::manual([1, 3]);
    show("manual {1,3}", &tax.flatten(&plan)?);
    show("level {2}", &tax.level_flatten(&BTreeSet::from([2]))?);

    if let Err(e) = tax.flatten(&FlatteningPlan::manual([7])) {
        println!("leaves cannot be removed: {e}");
    }
    Ok(())
}
