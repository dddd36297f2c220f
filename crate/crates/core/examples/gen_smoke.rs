//! Scratch helper: write a small generated corpus into the directory given
//! as the first argument.

use codemix::corpus::dataset_to_string;
use codemix::features::write_embeddings;
use codemix::synthetic::{synthetic_corpus_sized, synthetic_embeddings};

fn main() {
    let dir = std::env::args().nth(1).expect("output dir");
    let dir = std::path::PathBuf::from(dir);
    let c = synthetic_corpus_sized(7, 60, 15, 15);
    std::fs::write(dir.join("train.txt"), dataset_to_string(&c.train)).unwrap();
    std::fs::write(dir.join("valid.txt"), dataset_to_string(&c.valid)).unwrap();
    std::fs::write(dir.join("test.txt"), dataset_to_string(&c.test)).unwrap();
    let table = synthetic_embeddings::<f64>(48, 7);
    let mut buf = Vec::new();
    write_embeddings(&table, &mut buf).unwrap();
    std::fs::write(dir.join("embeddings.txt"), buf).unwrap();
    println!("wrote fixtures to {}", dir.display());
}
