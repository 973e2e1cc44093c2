//! Contaminant path parsing, ontology grouping and product categories.
//!
//! cargo run --example ontology

use chefs::catalog::{ontology_group, parse_param_path, GroupingDictionary};
use chefs::model::HazardCategory;

fn main() -> anyhow::Result<()> {
    for name in ["toxins::mycotoxins::aflatoxin b1", "heavy metals::lead", "nitrate", "hormones::::estradiol"] {
        match parse_param_path(name) {
            Ok(p) => {
                let (l1, l2) = (ontology_group(&p, 1), ontology_group(&p, 2));
                println!("{name:<36} level1={:<14} level2={}{}", l1.name, l2.name, if l2.truncated { " (truncated)" } else { "" });
            }
            Err(e) => println!("{name:<36} {e}"),
        }
    }

    let dict = GroupingDictionary::builtin();
    for product in [
        "mtx::all lists::food::eggs and egg products::whole eggs",
        "matrix::all lists::food::fruit and fruit products::citrus fruits::lemons",
        "mtx::all lists::food::something new",
    ] {
        println!("{product} -> {}", dict.assign(product, HazardCategory::PesticideResidues));
    }
    Ok(())
}
