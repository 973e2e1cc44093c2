//! Evaluation-code classes and sampling-strategy parsing.
//!
//! cargo run --example classify

use chefs::model::{canonicalize_code, classify_canonical, SamplingStrategy, KNOWN_EVALUATION_CODES};

fn main() {
    for code in KNOWN_EVALUATION_CODES {
        println!("{code:<52} {}", classify_canonical(&canonicalize_code(code)));
    }
    println!("{:<52} {}", "  DETECTED  ", classify_canonical(&canonicalize_code("  DETECTED  ")));
    for text in ["Objective sampling", "risk-based sampling", "not specified", "door to door"] {
        let (strategy, recognized) = SamplingStrategy::parse(Some(text));
        println!("{text:<24} {strategy:?}{}", if recognized { "" } else { " (unrecognized)" });
    }
}
