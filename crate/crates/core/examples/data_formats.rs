//! svmlight parsing, tf-idf weighting and the stratified train/validation
//! split.

use taxoflat::data::{split_train_validation, tfidf_l2, Dataset};

const DOCS: &str = "\
# label index:count ...
10 1:2 3:1
10 1:1 2:1
10 2:3
20 3:2 4:1
20 4:4
20 1:1 4:2
30 5:1
";

fn main() -> taxoflat::error::Result<()> {
    let ds = Dataset::parse_svmlight(DOCS, None)?;
    println!("{} examples, dim {}, classes {:?}", ds.len(), ds.dim, ds.class_counts());

    let tf = tfidf_l2(&ds)?;
    for e in tf.examples.iter().take(3) {
        let row: Vec<String> = e.x.entries().iter().map(|(i, v)| format!("{i}:{v:.3}")).collect();
        println!("{} {}  (norm {:.3})", e.label, row.join(" "), e.x.norm());
    }

    let (train, valid) = split_train_validation(&ds, 0.6, 42)?;
    println!("train labels {:?}", train.labels());
    println!("valid labels {:?} (the singleton class stays in train)", valid.labels());
    print!("round trip:\n{}", valid.to_svmlight());
    Ok(())
}
