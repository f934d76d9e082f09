use std::str::FromStr;

use super::evaluate::{baseline_scores, evaluate_method, Method};
use crate::classical::DenoiserConfig;
use crate::error::{Error, Result};
use crate::imgprep::PairedSample;

/// Candidate values per parameter, parsed from `key=v1,v2;key2=v3,...`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    pub axes: Vec<(String, Vec<String>)>,
}

impl FromStr for ParamGrid {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .split(';')
            .map(str::trim)
            .filter(|a| !a.is_empty())
            .map(|axis| {
                let (k, vs) = axis.split_once('=').ok_or_else(|| Error::Config(format!("grid axis '{axis}' is not key=v1,v2,...")))?;
                let values: Vec<String> = vs.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
                if values.is_empty() {
                    return Err(Error::Config(format!("grid axis '{k}' has no values")));
                }
                Ok((k.trim().to_string(), values))
            })
            .collect::<Result<Vec<_>>>()?;
        if axes.is_empty() {
            return Err(Error::Config("empty parameter grid".into()));
        }
        Ok(Self { axes })
    }
}

impl ParamGrid {
    /// Every combination as a `k=v,...` string, last axis varying fastest.
    pub fn combinations(&self) -> Vec<String> {
        let mut out = vec![String::new()];
        for (k, vs) in &self.axes {
            out = out
                .iter()
                .flat_map(|prefix| vs.iter().map(move |v| if prefix.is_empty() { format!("{k}={v}") } else { format!("{prefix},{k}={v}") }))
                .collect();
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub params: String,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSet {
    pub evaluated: Vec<Candidate>,
    /// Indices into `evaluated` of the non-dominated candidates, in grid order.
    pub pareto: Vec<usize>,
    /// Index into `evaluated` of the recommended (knee) candidate.
    pub knee: usize,
}

impl ParetoSet {
    pub fn recommended(&self) -> &Candidate {
        &self.evaluated[self.knee]
    }
}

/// True if `a` is at least as good as `b` in both objectives and better in one.
pub fn dominates(a: &Candidate, b: &Candidate) -> bool {
    a.psnr >= b.psnr && a.ssim >= b.ssim && (a.psnr > b.psnr || a.ssim > b.ssim)
}

pub fn pareto_front(cands: &[Candidate]) -> Vec<usize> {
    (0..cands.len()).filter(|&i| !cands.iter().any(|c| dominates(c, &cands[i]))).collect()
}

/// Front member maximizing the sum of min-max normalized PSNR and SSIM; the first on ties.
pub fn knee_point(cands: &[Candidate], front: &[usize]) -> usize {
    let range = |f: &dyn Fn(&Candidate) -> f64| {
        let vals: Vec<f64> = front.iter().map(|&i| f(&cands[i])).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi - lo)
    };
    let (p0, pr) = range(&|c| c.psnr);
    let (s0, sr) = range(&|c| c.ssim);
    let norm = |v: f64, lo: f64, r: f64| if r > 0.0 { (v - lo) / r } else { 0.0 };
    let mut best = front[0];
    let mut best_score = f64::NEG_INFINITY;
    for &i in front {
        let s = norm(cands[i].psnr, p0, pr) + norm(cands[i].ssim, s0, sr);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

pub fn select(evaluated: Vec<Candidate>) -> Result<ParetoSet> {
    if evaluated.is_empty() {
        return Err(Error::Config("no candidates to select from".into()));
    }
    let pareto = pareto_front(&evaluated);
    let knee = knee_point(&evaluated, &pareto);
    Ok(ParetoSet { evaluated, pareto, knee })
}

/// Exhaustively evaluates `grid` for `method` and returns the Pareto set and knee point.
pub fn tune_params(method: &str, grid: &ParamGrid, pairs: &[PairedSample]) -> Result<ParetoSet> {
    baseline_scores(pairs)?;
    let mut evaluated = Vec::new();
    for params in grid.combinations() {
        let cfg = DenoiserConfig::parse(method, &params)?;
        let row = evaluate_method(&Method::Classical(cfg), pairs, false)?;
        log::info!("{method} {params}: psnr {:.3} ssim {:.4}", row.psnr_db, row.ssim);
        evaluated.push(Candidate { params, psnr: row.psnr_db, ssim: row.ssim });
    }
    select(evaluated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(psnr: f64, ssim: f64) -> Candidate {
        Candidate { params: String::new(), psnr, ssim }
    }

    #[test]
    fn grid_parsing() {
        let g: ParamGrid = "strength_h=0.1,0.2; patch_radius=2,3,4".parse().unwrap();
        let combos = g.combinations();
        assert_eq!(combos.len(), 6);
        assert_eq!(combos[0], "strength_h=0.1,patch_radius=2");
        assert_eq!(combos[5], "strength_h=0.2,patch_radius=4");
        assert!("".parse::<ParamGrid>().is_err());
        assert!("strength_h".parse::<ParamGrid>().is_err());
    }

    #[test]
    fn dominance_examples() {
        let s = select(vec![c(20.0, 0.8), c(19.0, 0.7)]).unwrap();
        assert_eq!(s.pareto, vec![0]);
        let s = select(vec![c(20.0, 0.7), c(20.0, 0.8)]).unwrap();
        assert_eq!(s.pareto, vec![1]);
        let s = select(vec![c(22.0, 0.6), c(20.0, 0.8), c(21.5, 0.75)]).unwrap();
        assert_eq!(s.pareto, vec![0, 1, 2]);
        assert_eq!(s.knee, 2);
    }

    proptest! {
        #[test]
        fn front_matches_brute_force(points in prop::collection::vec((0u8..20, 0u8..20), 1..40)) {
            let cands: Vec<Candidate> = points.iter().map(|&(p, s)| c(f64::from(p), f64::from(s) / 20.0)).collect();
            let set = select(cands.clone()).unwrap();
            for i in 0..cands.len() {
                let dominated = cands.iter().enumerate().any(|(j, o)| j != i && o.psnr >= cands[i].psnr && o.ssim >= cands[i].ssim && (o.psnr > cands[i].psnr || o.ssim > cands[i].ssim));
                prop_assert_eq!(set.pareto.contains(&i), !dominated);
            }
            prop_assert!(set.pareto.contains(&set.knee));
        }
    }
}
