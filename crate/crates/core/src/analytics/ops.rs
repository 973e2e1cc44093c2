use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use rayon::prelude::*;

use super::dataset::{Dataset, ResultFact, SampleFact};
use super::request::{ReportRequest, StrategyGrouping};
use crate::catalog::{ontology_group, parse_param_path, ProductCategory};
use crate::model::{HazardCategory, SamplingStrategy};
use crate::report::{ratio, AggregateReport, Value};

/// Monoid of (total, noncompliant) counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub total: u64,
    pub noncompliant: u64,
}

impl Counts {
    fn add(&mut self, nc: bool) {
        self.total += 1;
        self.noncompliant += u64::from(nc);
    }

    fn merge(&mut self, other: Counts) {
        self.total += other.total;
        self.noncompliant += other.noncompliant;
    }

    pub fn ratio(&self) -> f64 {
        ratio(self.noncompliant, self.total)
    }
}

fn merge_maps<K: Eq + Hash>(mut a: HashMap<K, Counts>, b: HashMap<K, Counts>) -> HashMap<K, Counts> {
    if a.len() < b.len() {
        return merge_maps(b, a);
    }
    for (k, v) in b {
        a.entry(k).or_default().merge(v);
    }
    a
}

/// Compares `a.nc / a.total` with `b.nc / b.total` exactly.
pub fn cmp_ratio(a: Counts, b: Counts) -> Ordering {
    let l = u128::from(a.noncompliant) * u128::from(b.total.max(1));
    let r = u128::from(b.noncompliant) * u128::from(a.total.max(1));
    l.cmp(&r)
}

impl Dataset {
    /// Parallel group-by over results with a (total, noncompliant) monoid.
    pub fn group_results<K, F>(&self, key: F) -> HashMap<K, Counts>
    where
        K: Eq + Hash + Send,
        F: Fn(&ResultFact, &SampleFact) -> Option<K> + Sync,
    {
        self.results
            .par_iter()
            .fold(HashMap::new, |mut m: HashMap<K, Counts>, r| {
                if let Some(k) = key(r, &self.samples[r.sample as usize]) {
                    m.entry(k).or_default().add(r.noncompliant());
                }
                m
            })
            .reduce(HashMap::new, merge_maps)
    }

    /// Parallel group-by over samples; a sample is non-compliant when any of
    /// its results is.
    pub fn group_samples<K, F>(&self, key: F) -> HashMap<K, Counts>
    where
        K: Eq + Hash + Send,
        F: Fn(usize, &SampleFact) -> Option<K> + Sync,
    {
        self.samples
            .par_iter()
            .enumerate()
            .fold(HashMap::new, |mut m: HashMap<K, Counts>, (i, s)| {
                if let Some(k) = key(i, s) {
                    m.entry(k).or_default().add(self.tallies[i].any_noncompliant());
                }
                m
            })
            .reduce(HashMap::new, merge_maps)
    }

    pub fn run(&self, request: &ReportRequest) -> AggregateReport {
        match request {
            ReportRequest::YearlyTrend { hazard, year_min, year_max } => self.yearly_trend(request, *hazard, *year_min, *year_max),
            ReportRequest::TopContaminants { hazard, n } => self.top_contaminants(request, *hazard, *n),
            ReportRequest::HazardProductTable { hazard, top_hazards, top_products } => {
                self.cross_table(request, *hazard, *top_hazards, *top_products, true)
            }
            ReportRequest::ProductHazardTable { hazard, top_products, top_hazards } => {
                self.cross_table(request, *hazard, *top_products, *top_hazards, false)
            }
            ReportRequest::OntologyGroupStats { hazard, level, within } => {
                self.ontology_group_stats(request, *hazard, *level, within.as_deref())
            }
            ReportRequest::ProductCategoryStats { hazard } => self.product_category_stats(request, *hazard),
            ReportRequest::CountryStats { top_n } => self.country_stats(request, *top_n),
            ReportRequest::SamplingStrategyBreakdown { group_by } => self.sampling_strategy_breakdown(request, *group_by),
            ReportRequest::TradeLinks { min_samples, top_n, year_min, year_max } => {
                self.trade_links(request, *min_samples, *top_n, *year_min, *year_max)
            }
            ReportRequest::UnknownOriginTrend => self.unknown_origin_trend(request),
            ReportRequest::ResultsPerSampleDistribution => self.results_per_sample_distribution(request),
            ReportRequest::ContaminantOverlap => self.contaminant_overlap(request),
            ReportRequest::EvaluationSummary => self.evaluation_summary(request),
            ReportRequest::SparsityMatrix => self.sparsity_matrix(request),
        }
    }

    fn yearly_trend(&self, req: &ReportRequest, hazard: Option<HazardCategory>, lo: i32, hi: i32) -> AggregateReport {
        let groups = self.group_results(|r, s| {
            let y = s.year?;
            ((lo..=hi).contains(&y) && hazard.is_none_or(|h| h == r.hazard)).then_some((r.hazard, y))
        });
        let mut keys: Vec<_> = groups.into_iter().collect();
        keys.sort_by_key(|((h, y), _)| (h.index(), *y));
        let mut rep = req.empty_report();
        for ((h, y), c) in keys {
            rep.push(vec![y.into(), h.code().into(), c.total.into(), c.noncompliant.into(), c.ratio().into()]);
        }
        rep
    }

    fn top_contaminants(&self, req: &ReportRequest, hazard: Option<HazardCategory>, n: usize) -> AggregateReport {
        let groups = self.group_results(|r, _| hazard.is_none_or(|h| h == r.hazard).then_some(r.contaminant));
        let grand: u64 = groups.values().map(|c| c.total).sum();
        let mut rows: Vec<(u32, Counts)> = groups.into_iter().collect();
        rows.sort_by(|a, b| b.1.total.cmp(&a.1.total).then_with(|| self.str(a.0).cmp(self.str(b.0))));
        let mut rep = req.empty_report();
        for (rank, (c, counts)) in rows.into_iter().take(n).enumerate() {
            rep.push(vec![
                (rank + 1).into(),
                self.str(c).into(),
                self.contaminant_name(c).into(),
                counts.total.into(),
                ratio(counts.total, grand).into(),
                counts.noncompliant.into(),
                counts.ratio().into(),
            ]);
        }
        rep
    }

    /// Outer/inner top-n table; `contaminant_outer` picks which side is outer.
    fn cross_table(
        &self,
        req: &ReportRequest,
        hazard: HazardCategory,
        n_outer: usize,
        n_inner: usize,
        contaminant_outer: bool,
    ) -> AggregateReport {
        let cells = self.group_results(|r, s| {
            (r.hazard == hazard).then(|| {
                if contaminant_outer {
                    (r.contaminant, s.product)
                } else {
                    (s.product, r.contaminant)
                }
            })
        });
        let mut outer_totals: HashMap<u32, u64> = HashMap::new();
        let mut inner: HashMap<u32, Vec<(u32, Counts)>> = HashMap::new();
        for ((o, i), c) in cells {
            *outer_totals.entry(o).or_default() += c.total;
            inner.entry(o).or_default().push((i, c));
        }
        let mut outers: Vec<(u32, u64)> = outer_totals.into_iter().collect();
        outers.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| self.str(a.0).cmp(self.str(b.0))));
        let name = |id: u32, is_contaminant: bool| {
            if is_contaminant {
                self.contaminant_name(id)
            } else {
                self.product_name(id)
            }
        };
        let mut rep = req.empty_report();
        for (orank, (o, ototal)) in outers.into_iter().take(n_outer).enumerate() {
            let mut list = inner.remove(&o).unwrap_or_default();
            list.sort_by(|a, b| b.1.total.cmp(&a.1.total).then_with(|| self.str(a.0).cmp(self.str(b.0))));
            for (irank, (i, c)) in list.into_iter().take(n_inner).enumerate() {
                rep.push(vec![
                    (orank + 1).into(),
                    self.str(o).into(),
                    name(o, contaminant_outer).into(),
                    ototal.into(),
                    (irank + 1).into(),
                    self.str(i).into(),
                    name(i, !contaminant_outer).into(),
                    c.total.into(),
                    c.noncompliant.into(),
                    c.ratio().into(),
                ]);
            }
        }
        rep
    }

    fn ontology_group_stats(
        &self,
        req: &ReportRequest,
        hazard: Option<HazardCategory>,
        level: usize,
        within: Option<&str>,
    ) -> AggregateReport {
        let by_name = self.group_results(|r, _| {
            hazard
                .is_none_or(|h| h == r.hazard)
                .then_some((r.contaminant_name, r.contaminant))
        });
        let mut groups: BTreeMap<(String, bool), (Counts, HashSet<u32>)> = BTreeMap::new();
        let mut parsed: HashMap<u32, Option<crate::catalog::OntologyPath>> = HashMap::new();
        for ((name, contaminant), c) in by_name {
            let path = parsed
                .entry(name)
                .or_insert_with(|| parse_param_path(self.str(name)).ok());
            let key = match path {
                None if within.is_none() => (UNPARSED.to_string(), false),
                None => continue,
                Some(p) => {
                    if within.is_some_and(|w| ontology_group(p, 1).name != w) {
                        continue;
                    }
                    let g = ontology_group(p, level);
                    (g.name, g.truncated)
                }
            };
            let e = groups.entry(key).or_default();
            e.0.merge(c);
            e.1.insert(contaminant);
        }
        let mut rows: Vec<_> = groups.into_iter().collect();
        rows.sort_by(|a, b| b.1 .0.total.cmp(&a.1 .0.total).then_with(|| a.0.cmp(&b.0)));
        let mut rep = req.empty_report();
        for ((g, truncated), (c, ids)) in rows {
            rep.push(vec![
                g.into(),
                truncated.into(),
                c.total.into(),
                c.noncompliant.into(),
                c.ratio().into(),
                ids.len().into(),
            ]);
        }
        rep
    }

    fn product_category_stats(&self, req: &ReportRequest, hazard: Option<HazardCategory>) -> AggregateReport {
        let by_name = self.group_results(|r, s| hazard.is_none_or(|h| h == r.hazard).then_some((s.product_name, r.hazard)));
        let mut cats: BTreeMap<ProductCategory, Counts> = BTreeMap::new();
        for ((name, h), c) in by_name {
            cats.entry(self.dictionary.assign(self.str(name), h)).or_default().merge(c);
        }
        let grand: u64 = cats.values().map(|c| c.total).sum();
        let mut rows: Vec<_> = cats.into_iter().collect();
        rows.sort_by(|a, b| b.1.total.cmp(&a.1.total).then_with(|| a.0.cmp(&b.0)));
        let mut rep = req.empty_report();
        for (rank, (cat, c)) in rows.into_iter().enumerate() {
            rep.push(vec![
                (rank + 1).into(),
                cat.name().into(),
                c.total.into(),
                ratio(c.total, grand).into(),
                c.noncompliant.into(),
                c.ratio().into(),
            ]);
        }
        rep
    }

    fn country_stats(&self, req: &ReportRequest, top_n: usize) -> AggregateReport {
        let groups = self.group_results(|r, s| Some((s.country, r.hazard)));
        let mut per: HashMap<u32, [Counts; 3]> = HashMap::new();
        for ((c, h), counts) in groups {
            per.entry(c).or_default()[h.index()].merge(counts);
        }
        let total_of = |a: &[Counts; 3]| a.iter().map(|c| c.total).sum::<u64>();
        let grand: u64 = per.values().map(total_of).sum();
        let mut rows: Vec<_> = per.into_iter().collect();
        rows.sort_by(|a, b| total_of(&b.1).cmp(&total_of(&a.1)).then_with(|| self.str(a.0).cmp(self.str(b.0))));
        let mut rep = req.empty_report();
        for (rank, (country, hz)) in rows.into_iter().take(top_n).enumerate() {
            let mut all = Counts::default();
            hz.iter().for_each(|c| all.merge(*c));
            let mut row: Vec<Value> = vec![
                (rank + 1).into(),
                self.str(country).into(),
                all.total.into(),
                ratio(all.total, grand).into(),
                all.noncompliant.into(),
                all.ratio().into(),
            ];
            for c in hz {
                row.push(c.total.into());
                row.push(c.noncompliant.into());
            }
            rep.push(row);
        }
        rep
    }

    fn sampling_strategy_breakdown(&self, req: &ReportRequest, group_by: StrategyGrouping) -> AggregateReport {
        // group key: (hazard index or 3 for all, year, country text, strategy)
        type Key = (usize, Option<i32>, String, SamplingStrategy);
        let acc: HashMap<Key, [u64; 3]> = self
            .samples
            .par_iter()
            .enumerate()
            .fold(HashMap::new, |mut m: HashMap<Key, [u64; 3]>, (i, s)| {
                let t = &self.tallies[i];
                let mut add = |key: Key, results: u64, nc: u64| {
                    let e = m.entry(key).or_default();
                    e[0] += 1;
                    e[1] += results;
                    e[2] += nc;
                };
                match group_by {
                    StrategyGrouping::Overall => add((3, None, String::new(), s.strategy), t.total(), t.total_noncompliant()),
                    StrategyGrouping::PerYear => {
                        if let Some(y) = s.year {
                            for h in HazardCategory::ALL {
                                let k = h.index();
                                if t.results[k] > 0 {
                                    add((k, Some(y), String::new(), s.strategy), t.results[k].into(), t.noncompliant[k].into());
                                }
                            }
                        }
                    }
                    StrategyGrouping::PerCountryHazard => {
                        for h in HazardCategory::ALL {
                            let k = h.index();
                            if t.results[k] > 0 {
                                add(
                                    (k, None, self.str(s.country).to_string(), s.strategy),
                                    t.results[k].into(),
                                    t.noncompliant[k].into(),
                                );
                            }
                        }
                    }
                }
                m
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    let e = a.entry(k).or_default();
                    for j in 0..3 {
                        e[j] += v[j];
                    }
                }
                a
            });
        let mut group_totals: HashMap<(usize, Option<i32>, String), u64> = HashMap::new();
        for ((h, y, c, _), v) in &acc {
            *group_totals.entry((*h, *y, c.clone())).or_default() += v[0];
        }
        let mut rows: Vec<_> = acc.into_iter().collect();
        rows.sort_by(|a, b| (a.0 .0, a.0 .1, &a.0 .2, a.0 .3.index()).cmp(&(b.0 .0, b.0 .1, &b.0 .2, b.0 .3.index())));
        let mut rep = req.empty_report();
        for ((h, y, c, strategy), v) in rows {
            let group_total = group_totals[&(h, y, c.clone())];
            rep.push(vec![
                group_by.as_str().into(),
                if h == 3 { ALL.into() } else { HazardCategory::ALL[h].code().into() },
                y.map_or_else(|| Value::from(ALL), Value::from),
                if group_by == StrategyGrouping::PerCountryHazard { c.into() } else { ALL.into() },
                strategy.label().into(),
                v[0].into(),
                ratio(v[0], group_total).into(),
                v[1].into(),
                v[2].into(),
                ratio(v[2], v[1]).into(),
            ]);
        }
        rep
    }

    fn trade_links(
        &self,
        req: &ReportRequest,
        min_samples: u64,
        top_n: usize,
        year_min: Option<i32>,
        year_max: Option<i32>,
    ) -> AggregateReport {
        let ranged = year_min.is_some() || year_max.is_some();
        let groups = self.group_samples(|_, s| {
            if ranged {
                let y = s.year?;
                if year_min.is_some_and(|lo| y < lo) || year_max.is_some_and(|hi| y > hi) {
                    return None;
                }
            }
            (s.origin != s.country).then_some((s.origin, s.country))
        });
        let mut rows: Vec<_> = groups.into_iter().filter(|(_, c)| c.total > min_samples).collect();
        rows.sort_by(|a, b| {
            cmp_ratio(b.1, a.1)
                .then_with(|| b.1.total.cmp(&a.1.total))
                .then_with(|| self.str(a.0 .0).cmp(self.str(b.0 .0)))
                .then_with(|| self.str(a.0 .1).cmp(self.str(b.0 .1)))
        });
        let mut rep = req.empty_report();
        for (rank, ((o, d), c)) in rows.into_iter().take(top_n).enumerate() {
            rep.push(vec![
                (rank + 1).into(),
                self.str(o).into(),
                self.str(d).into(),
                c.total.into(),
                c.noncompliant.into(),
                c.ratio().into(),
            ]);
        }
        rep
    }

    fn unknown_origin_trend(&self, req: &ReportRequest) -> AggregateReport {
        // "noncompliant" slot counts unknown-origin samples here
        let groups: HashMap<i32, Counts> = self
            .samples
            .par_iter()
            .fold(HashMap::new, |mut m: HashMap<i32, Counts>, s| {
                if let Some(y) = s.year {
                    m.entry(y).or_default().add(s.origin_unknown);
                }
                m
            })
            .reduce(HashMap::new, merge_maps);
        let mut rows: Vec<_> = groups.into_iter().collect();
        rows.sort_by_key(|(y, _)| *y);
        let mut rep = req.empty_report();
        for (y, c) in rows {
            rep.push(vec![y.into(), c.total.into(), c.noncompliant.into(), c.ratio().into()]);
        }
        rep
    }

    fn results_per_sample_distribution(&self, req: &ReportRequest) -> AggregateReport {
        let hist: HashMap<u64, u64> = self
            .tallies
            .par_iter()
            .fold(HashMap::new, |mut m: HashMap<u64, u64>, t| {
                *m.entry(t.total()).or_default() += 1;
                m
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() += v;
                }
                a
            });
        let mut rows: Vec<_> = hist.into_iter().collect();
        rows.sort();
        let mut rep = req.empty_report();
        for (k, samples) in rows {
            rep.push(vec![
                "histogram".into(),
                k.to_string().into(),
                samples.into(),
                (k * samples).into(),
                (k as f64).into(),
            ]);
        }
        for h in HazardCategory::ALL {
            let (samples, results) = self
                .tallies
                .par_iter()
                .filter(|t| t.results[h.index()] > 0)
                .map(|t| (1u64, u64::from(t.results[h.index()])))
                .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
            rep.push(vec![
                "hazard_mean".into(),
                h.code().into(),
                samples.into(),
                results.into(),
                ratio(results, samples).into(),
            ]);
        }
        rep
    }

    fn contaminant_overlap(&self, req: &ReportRequest) -> AggregateReport {
        let masks: HashMap<u32, u8> = self
            .results
            .par_iter()
            .fold(HashMap::new, |mut m: HashMap<u32, u8>, r| {
                *m.entry(r.contaminant).or_default() |= 1 << r.hazard.index();
                m
            })
            .reduce(HashMap::new, |mut a, b| {
                for (k, v) in b {
                    *a.entry(k).or_default() |= v;
                }
                a
            });
        overlap_report(req, masks.values().copied())
    }

    fn evaluation_summary(&self, req: &ReportRequest) -> AggregateReport {
        let groups = self.group_results(|r, _| Some(r.eval));
        let grand: u64 = groups.values().map(|c| c.total).sum();
        let mut rows: Vec<_> = groups.into_iter().collect();
        rows.sort_by(|a, b| b.1.total.cmp(&a.1.total).then_with(|| self.str(a.0).cmp(self.str(b.0))));
        let mut rep = req.empty_report();
        for (code, c) in rows {
            let canonical = self.str(code);
            rep.push(vec![
                canonical.into(),
                crate::model::classify_canonical(canonical).as_str().into(),
                c.total.into(),
                ratio(c.total, grand).into(),
            ]);
        }
        rep
    }

    fn sparsity_matrix(&self, req: &ReportRequest) -> AggregateReport {
        let mut rep = req.empty_report();
        for (file, rates) in &self.sparsity {
            for (var, rate) in rates {
                rep.push(vec![file.as_str().into(), var.as_str().into(), (*rate).into()]);
            }
        }
        rep
    }
}

pub const UNPARSED: &str = "unparsed";
pub const ALL: &str = "*";

/// Builds the overlap report from per-contaminant hazard bitmasks
/// (bit i = `HazardCategory::ALL[i]`).
pub fn overlap_report(req: &ReportRequest, masks: impl Iterator<Item = u8>) -> AggregateReport {
    let mut by_card = [0u64; 4];
    let mut membership = [0u64; 3];
    let mut pairs = [0u64; 3];
    let mut unique = 0u64;
    for m in masks {
        unique += 1;
        by_card[m.count_ones() as usize] += 1;
        for (i, slot) in membership.iter_mut().enumerate() {
            if m & (1 << i) != 0 {
                *slot += 1;
            }
        }
        for (p, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            if m & (1 << a) != 0 && m & (1 << b) != 0 {
                pairs[p] += 1;
            }
        }
    }
    let mut rep = req.empty_report();
    let codes = HazardCategory::ALL.map(|h| h.code());
    rep.push(vec!["total".into(), ALL.into(), unique.into(), ratio(unique, unique).into()]);
    for k in 1..=3 {
        rep.push(vec!["cardinality".into(), k.to_string().into(), by_card[k].into(), ratio(by_card[k], unique).into()]);
    }
    for (i, code) in codes.iter().enumerate() {
        rep.push(vec!["membership".into(), (*code).into(), membership[i].into(), ratio(membership[i], unique).into()]);
    }
    for (p, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
        rep.push(vec![
            "pairwise".into(),
            format!("{}+{}", codes[a], codes[b]).into(),
            pairs[p].into(),
            ratio(pairs[p], unique).into(),
        ]);
    }
    rep
}
