//! Edit distance and normalized similarity on a few pairs.

use mmfuse::prelude::*;

fn main() {
    let pairs = [
        ("kitten", "sitting"),
        ("helo world", "Hello, World!"),
        ("a man cooking", "a man cooking food"),
        ("欢迎光临", "欢迎光"),
        ("", ""),
    ];
    for (a, b) in pairs {
        println!("{a:?} vs {b:?}: distance {} similarity {:.4}", levenshtein(a, b), normalized_similarity(a, b));
    }
    let a = BBox::new(0.0, 0.0, 10.0, 10.0);
    let b = BBox::new(5.0, 5.0, 10.0, 10.0);
    println!("iou of half-offset squares: {:.6}", iou(&a, &b));
}
