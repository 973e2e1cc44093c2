use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HazardCategory;

/// Header and cell perturbations applied to one generated file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchemaVariant {
    /// Emit a sample code column; without it samples are keyed by content.
    pub sample_code: bool,
    /// Use the alternative synonyms (`sampId`, `sampCountryCode`, ...).
    pub alt_synonyms: bool,
    /// Use canonical variable names as headers, in mixed case.
    pub canonical_headers: bool,
    /// Leave out the origin column; every origin becomes UNKNOWN.
    pub drop_origin: bool,
    /// Leave out product and contaminant full names; names fall back to ids.
    pub drop_names: bool,
    /// Leave out the sampling year column; years come from the date.
    pub date_only: bool,
    /// Leave out the sampling country column.
    pub drop_sampling_country: bool,
    /// Add a column no synonym knows about.
    pub extra_column: bool,
    pub shuffle_columns: bool,
    pub bom: bool,
    pub crlf: bool,
    pub gzip: bool,
}

impl SchemaVariant {
    /// Columns that shape sample-level cells; samples may be shared only
    /// between files that agree on these.
    pub fn sample_signature(&self) -> (bool, bool, bool, bool, bool) {
        (self.sample_code, self.drop_origin, self.drop_names, self.date_only, self.drop_sampling_country)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePlan {
    pub hazard: HazardCategory,
    pub country: String,
    pub year: i32,
    /// Data rows written, counting injected duplicates and malformed rows.
    pub rows: u64,
    /// Optional file-name suffix, for several files in one partition.
    #[serde(default)]
    pub suffix: Option<String>,
    #[serde(default)]
    pub variant: SchemaVariant,
}

impl FilePlan {
    pub fn file_name(&self) -> String {
        let mut name = format!("{}_{}_{}", self.hazard.code(), self.country, self.year);
        if let Some(s) = &self.suffix {
            name.push('_');
            name.push_str(s);
        }
        name.push_str(if self.variant.gzip { ".csv.gz" } else { ".csv" });
        name
    }
}

/// A catalogue term in a generator pool.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoolTerm {
    pub id: String,
    pub full_name: String,
    /// Hazards a contaminant may be measured under; empty for products.
    #[serde(default)]
    pub hazards: Vec<HazardCategory>,
}

/// Extra samples with a fixed origin added to the file for
/// (`hazard`, `destination`, `year`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedLink {
    pub origin: String,
    pub destination: String,
    pub hazard: HazardCategory,
    pub year: i32,
    pub samples: u64,
    pub noncompliant_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusPlan {
    pub seed: u64,
    pub files: Vec<FilePlan>,
    pub duplicate_rate: f64,
    pub malformed_rate: f64,
    /// Per-result probability of a non-compliant evaluation code.
    pub noncompliance_rate: f64,
    /// Share of samples with an unknown origin.
    pub unknown_origin_rate: f64,
    /// Share of samples with a known origin other than the sampling country.
    pub foreign_origin_rate: f64,
    /// Share of samples dated only by a date, or not dated at all.
    pub undated_rate: f64,
    /// Share of code-keyed samples reused from a file of another hazard with
    /// the same country and year.
    pub shared_sample_rate: f64,
    /// Per-result probability of an evaluation code outside the known set.
    pub unknown_eval_rate: f64,
    pub max_results_per_sample: [u32; 3],
    pub countries: Vec<String>,
    pub contaminants: Vec<PoolTerm>,
    pub products: Vec<PoolTerm>,
    #[serde(default)]
    pub planted_links: Vec<PlantedLink>,
}

fn rate_ok(name: &str, r: f64) -> Result<()> {
    if (0.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::InvalidPlan(format!("{name} must be in [0,1], got {r}")))
    }
}

impl CorpusPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: CorpusPlan = serde_json::from_str(text).map_err(|e| Error::InvalidPlan(e.to_string()))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for (n, r) in [
            ("duplicate_rate", self.duplicate_rate),
            ("malformed_rate", self.malformed_rate),
            ("noncompliance_rate", self.noncompliance_rate),
            ("unknown_origin_rate", self.unknown_origin_rate),
            ("foreign_origin_rate", self.foreign_origin_rate),
            ("undated_rate", self.undated_rate),
            ("shared_sample_rate", self.shared_sample_rate),
            ("unknown_eval_rate", self.unknown_eval_rate),
        ] {
            rate_ok(n, r)?;
        }
        if self.duplicate_rate + self.malformed_rate >= 1.0 && self.files.iter().any(|f| f.rows > 0) {
            return Err(Error::InvalidPlan("duplicate_rate + malformed_rate must stay below 1".into()));
        }
        if self.unknown_origin_rate + self.foreign_origin_rate > 1.0 {
            return Err(Error::InvalidPlan("unknown_origin_rate + foreign_origin_rate exceeds 1".into()));
        }
        if self.products.is_empty() {
            return Err(Error::InvalidPlan("product pool is empty".into()));
        }
        if self.max_results_per_sample.contains(&0) {
            return Err(Error::InvalidPlan("max_results_per_sample entries must be positive".into()));
        }
        for h in HazardCategory::ALL {
            let pool = self.contaminants.iter().filter(|c| c.hazards.contains(&h)).count();
            if pool < self.max_results_per_sample[h.index()] as usize && self.files.iter().any(|f| f.hazard == h) {
                return Err(Error::InvalidPlan(format!(
                    "{h} needs at least {} contaminants to keep results within a sample distinct",
                    self.max_results_per_sample[h.index()]
                )));
            }
        }
        let mut names = std::collections::BTreeSet::new();
        for f in &self.files {
            if !names.insert(f.file_name().to_ascii_lowercase().replace(".gz", "")) {
                return Err(Error::InvalidPlan(format!("duplicate file {}", f.file_name())));
            }
            let valid_cc = (2..=3).contains(&f.country.len()) && f.country.chars().all(|c| c.is_ascii_uppercase());
            if !valid_cc {
                return Err(Error::InvalidPlan(format!("country code {:?} must be 2-3 uppercase letters", f.country)));
            }
            if f.suffix.as_deref().is_some_and(|s| s.is_empty() || s.contains(['/', '.'])) {
                return Err(Error::InvalidPlan(format!("bad suffix in {}", f.file_name())));
            }
            if !f.variant.sample_code {
                let same = self
                    .files
                    .iter()
                    .filter(|g| g.hazard == f.hazard && g.country == f.country && g.year == f.year)
                    .count();
                if same > 1 {
                    return Err(Error::InvalidPlan(format!(
                        "{}: files without sample codes must be alone in their partition",
                        f.file_name()
                    )));
                }
            }
        }
        for l in &self.planted_links {
            if l.noncompliant_samples > l.samples {
                return Err(Error::InvalidPlan(format!("{}->{}: more noncompliant than samples", l.origin, l.destination)));
            }
            let host = self
                .files
                .iter()
                .any(|f| f.hazard == l.hazard && f.country == l.destination && f.year == l.year && f.suffix.is_none());
            if !host {
                return Err(Error::InvalidPlan(format!(
                    "planted link {}->{} needs an unsuffixed {} file for {}/{}",
                    l.origin, l.destination, l.hazard, l.destination, l.year
                )));
            }
        }
        Ok(())
    }

    /// A small plan with the default pools, for examples and unit tests.
    pub fn small(seed: u64) -> CorpusPlan {
        let mut plan = Self::base(seed);
        let v = |sample_code: bool| SchemaVariant {
            sample_code,
            ..Default::default()
        };
        plan.files = vec![
            FilePlan { hazard: HazardCategory::ChemicalContaminants, country: "DE".into(), year: 2013, rows: 400, suffix: None, variant: v(true) },
            FilePlan { hazard: HazardCategory::PesticideResidues, country: "DE".into(), year: 2013, rows: 600, suffix: None, variant: v(true) },
            FilePlan {
                hazard: HazardCategory::PesticideResidues,
                country: "FR".into(),
                year: 2019,
                rows: 500,
                suffix: None,
                variant: SchemaVariant { sample_code: false, alt_synonyms: true, shuffle_columns: true, gzip: true, ..Default::default() },
            },
            FilePlan {
                hazard: HazardCategory::VMPR,
                country: "IT".into(),
                year: 2021,
                rows: 300,
                suffix: Some("a".into()),
                variant: SchemaVariant { sample_code: true, canonical_headers: true, bom: true, crlf: true, ..Default::default() },
            },
            FilePlan {
                hazard: HazardCategory::VMPR,
                country: "IT".into(),
                year: 2021,
                rows: 300,
                suffix: Some("b".into()),
                variant: SchemaVariant { sample_code: true, alt_synonyms: true, extra_column: true, drop_names: true, ..Default::default() },
            },
        ];
        plan
    }

    /// Desk-scale plan: about fifty files and a million result rows, mixing
    /// every schema variant.
    pub fn desk_scale(seed: u64) -> CorpusPlan {
        use rand::{Rng, SeedableRng};
        let mut plan = Self::base(seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_f11e);
        let countries = plan.countries.clone();
        let mut files: Vec<FilePlan> = Vec::new();
        while files.len() < 50 {
            let hazard = HazardCategory::ALL[rng.gen_range(0..3)];
            let country = countries[rng.gen_range(0..8)].clone();
            let year = rng.gen_range(1999..=2024);
            let key_taken = |fs: &[FilePlan]| fs.iter().any(|f| f.hazard == hazard && f.country == country && f.year == year);
            let variant = SchemaVariant {
                sample_code: true,
                alt_synonyms: rng.gen_bool(0.3),
                canonical_headers: rng.gen_bool(0.1),
                drop_origin: rng.gen_bool(0.08),
                drop_names: rng.gen_bool(0.08),
                date_only: rng.gen_bool(0.15),
                drop_sampling_country: rng.gen_bool(0.1),
                extra_column: rng.gen_bool(0.3),
                shuffle_columns: rng.gen_bool(0.3),
                bom: rng.gen_bool(0.2),
                crlf: rng.gen_bool(0.2),
                gzip: rng.gen_bool(0.25),
            };
            let rows = rng.gen_range(10_000..=30_000);
            if key_taken(&files) {
                // a second part of an existing partition
                let n = files
                    .iter()
                    .filter(|f| f.hazard == hazard && f.country == country && f.year == year)
                    .count();
                if files.iter().any(|f| f.hazard == hazard && f.country == country && f.year == year && !f.variant.sample_code) {
                    continue;
                }
                files.push(FilePlan { hazard, country, year, rows, suffix: Some(format!("part{}", n + 1)), variant });
            } else {
                let variant = SchemaVariant {
                    sample_code: !rng.gen_bool(0.2),
                    ..variant
                };
                files.push(FilePlan { hazard, country, year, rows, suffix: None, variant });
            }
        }
        plan.files = files;
        plan
    }

    fn base(seed: u64) -> CorpusPlan {
        CorpusPlan {
            seed,
            files: Vec::new(),
            duplicate_rate: 0.02,
            malformed_rate: 0.002,
            noncompliance_rate: 0.01,
            unknown_origin_rate: 0.08,
            foreign_origin_rate: 0.3,
            undated_rate: 0.01,
            shared_sample_rate: 0.05,
            unknown_eval_rate: 0.001,
            max_results_per_sample: [8, 40, 20],
            countries: ["DE", "FR", "IT", "ES", "NL", "BE", "CZ", "PL", "CN", "KH", "TR", "US", "BR", "IN"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            contaminants: default_contaminants(),
            products: default_products(),
            planted_links: Vec::new(),
        }
    }
}

fn term(id: &str, full_name: &str, hazards: &[HazardCategory]) -> PoolTerm {
    PoolTerm {
        id: id.to_string(),
        full_name: full_name.to_string(),
        hazards: hazards.to_vec(),
    }
}

/// Contaminant pool: `::` paths across several groups, some ids shared
/// between hazards and a few flat or malformed names.
pub fn default_contaminants() -> Vec<PoolTerm> {
    use HazardCategory::{ChemicalContaminants as CC, PesticideResidues as PEST, VMPR};
    let mut v = vec![
        term("RF-00000001-CHE", "metals::heavy metals::lead (pb)", &[CC]),
        term("RF-00000002-CHE", "metals::heavy metals::cadmium (cd)", &[CC, VMPR]),
        term("RF-00000003-CHE", "metals::heavy metals::mercury (hg)", &[CC]),
        term("RF-00000004-CHE", "metals::metalloids::arsenic (as)", &[CC]),
        term("RF-00000005-CHE", "toxins::mycotoxins::aflatoxin b1", &[CC]),
        term("RF-00000006-CHE", "toxins::mycotoxins::ochratoxin a", &[CC]),
        term("RF-00000007-CHE", "toxins::mycotoxins::deoxynivalenol", &[CC]),
        term("RF-00000008-CHE", "toxins::phytotoxins::tropane alkaloids::atropine", &[CC]),
        term("RF-00000009-CHE", "toxins::phytotoxins::pyrrolizidine alkaloids", &[CC]),
        term("RF-00000010-CHE", "toxins::marine biotoxins::okadaic acid", &[CC]),
        term("RF-00000011-CHE", "toxins::biogenic amines::histamine", &[CC]),
        term("RF-00000012-CHE", "process contaminants::acrylamide", &[CC]),
        term("RF-00000013-CHE", "persistent organic pollutants::dioxins::2,3,7,8-tcdd", &[CC, VMPR]),
        term("RF-00000014-CHE", "persistent organic pollutants::pcbs::pcb 153", &[CC, VMPR]),
        term("RF-00000015-CHE", "nitrate", &[CC]),
        term("RF-00000016-PPP", "pesticides::insecticides::organophosphates::chlorpyrifos", &[PEST, CC, VMPR]),
        term("RF-00000017-PPP", "pesticides::insecticides::organophosphates::diazinon", &[PEST]),
        term("RF-00000018-PPP", "pesticides::insecticides::organophosphates::pirimiphos-methyl", &[PEST]),
        term("RF-00000019-PPP", "pesticides::fungicides::carboxamides::boscalid", &[PEST]),
        term("RF-00000020-PPP", "pesticides::fungicides::triazoles::tebuconazole", &[PEST]),
        term("RF-00000021-PPP", "pesticides::herbicides::glyphosate", &[PEST]),
        term("RF-00000022-PPP", "pesticides::insecticides::neonicotinoids::imidacloprid", &[PEST]),
        term("RF-00000023-PPP", "pesticides::acaricides::fenpyroximate", &[PEST]),
        term("RF-00000024-PPP", "pesticides::fungicides::dithiocarbamates", &[PEST]),
        term("RF-00000025-PPP", "pesticides::insecticides::pyrethroids::cypermethrin", &[PEST, VMPR]),
        term("RF-00000026-VET", "veterinary drugs::antibacterials::tetracyclines::doxycycline", &[VMPR]),
        term("RF-00000027-VET", "veterinary drugs::antibacterials::tetracyclines::oxytetracycline", &[VMPR]),
        term("RF-00000028-VET", "veterinary drugs::antibacterials::sulfonamides::sulfadiazine", &[VMPR]),
        term("RF-00000029-VET", "veterinary drugs::antibacterials::quinolones::enrofloxacin", &[VMPR]),
        term("RF-00000030-VET", "veterinary drugs::anthelmintics::ivermectin", &[VMPR]),
        term("RF-00000031-VET", "veterinary drugs::coccidiostats::monensin", &[VMPR]),
        term("RF-00000032-VET", "prohibited substances::chloramphenicol", &[VMPR]),
        term("RF-00000033-VET", "prohibited substances::nitrofurans::semicarbazide", &[VMPR]),
        term("RF-00000034-VET", "hormones::::estradiol", &[VMPR]),
    ];
    // filler so every hazard can draw many distinct contaminants per sample
    for i in 0..40 {
        v.push(term(
            &format!("RF-{:08}-PPP", 100 + i),
            &format!("pesticides::other actives::active substance {:02}", i),
            &[PEST],
        ));
    }
    for i in 0..12 {
        v.push(term(
            &format!("RF-{:08}-VET", 200 + i),
            &format!("veterinary drugs::other residues::residue {:02}", i),
            &[VMPR],
        ));
    }
    v
}

/// Product pool: FoodEx-style paths, some naming the same product under the
/// "matrix" and the "mtx" prefix.
pub fn default_products() -> Vec<PoolTerm> {
    [
        ("A01QX", "mtx::all lists::food::eggs and egg products::whole eggs"),
        ("A0EZS", "matrix::food::fruit used as fruit::citrus fruits::oranges"),
        ("A01DJ", "mtx::all lists::food::fruit used as fruit::berries and small fruits::strawberries"),
        ("A00QH", "mtx::all lists::food::vegetables and vegetable products::leaf vegetables, herbs and edible flowers::lettuces"),
        ("A0DQS", "matrix::food::vegetables::sweet peppers"),
        ("A01RG", "mtx::all lists::food::meat and meat products::pig fresh meat"),
        ("A0F2S", "mtx::all lists::food::edible offal::pig kidney"),
        ("A02LR", "mtx::all lists::food::milk and dairy products::buttermilk"),
        ("A0C0R", "matrix::food::milk and dairy products::cows milk"),
        ("A014C", "mtx::all lists::food::nuts, seeds::oilseeds and oil fruits::peanuts"),
        ("A000L", "mtx::all lists::food::grains and grain-based products::barley"),
        ("A005B", "mtx::all lists::food::fish, seafood, amphibians, reptiles and invertebrates::salmon"),
        ("A0EQN", "mtx::all lists::food::honey and other apicultural products::honey"),
        ("A03HG", "mtx::all lists::food::food for infants and young children::infant formula"),
        ("A0ETY", "mtx::all lists::food::coffee, cocoa, tea and infusions::hot drinks and similar (coffee, cocoa, tea and herbal infusions)::tea"),
        ("A04ZA", "mtx::all lists::feed::compound feed"),
        ("A0BXX", "mtx::all lists::food::composite dishes::pizza"),
        ("A0ZZZ", "mtx::all lists::food::unusual products::kelp crisps"),
    ]
    .iter()
    .map(|(id, name)| term(id, name, &[]))
    .collect()
}
