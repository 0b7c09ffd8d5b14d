//! Oracles and fixture helpers shared by the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use laylens_core::explain::{parse_simplifier_output, ParsedExplanations, RepairReport};
use laylens_core::mask::{rle_decode, BinaryMask};
use laylens_core::RegionFinding;
use serde_json::{json, Value};

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture(name: &str) -> Vec<u8> {
    let path = fixtures_dir().join(name);
    std::fs::read(&path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Two-sided exact signed-rank p-value by walking all 2^n sign vectors.
/// Ranks come from pairwise counting rather than sorting.
pub fn brute_force_wilcoxon(pairs: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let d: Vec<f64> = pairs.iter().map(|(a, b)| b - a).filter(|x| *x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return None;
    }
    let ranks: Vec<f64> = d
        .iter()
        .map(|x| {
            let below = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let tied = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            below + (tied + 1.0) / 2.0
        })
        .collect();
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x < 0.0).map(|(_, r)| r).sum();
    let (mut le, mut ge) = (0u64, 0u64);
    for signs in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| signs >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= w_plus {
            le += 1;
        }
        if w >= w_plus {
            ge += 1;
        }
    }
    let p = (2.0 * le.min(ge) as f64 / (1u64 << n) as f64).min(1.0);
    Some((w_plus, w_minus, p))
}

/// Chebyshev-ball dilation by direct neighbourhood search.
pub fn naive_dilate(mask: &BinaryMask, r: i64) -> BinaryMask {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let mut out = BinaryMask::empty(mask.width(), mask.height());
    for y in 0..h {
        for x in 0..w {
            let hit = (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (nx, ny) = (x + dx, y + dy);
                    nx >= 0 && ny >= 0 && nx < w && ny < h && mask.get(nx as u32, ny as u32)
                })
            });
            if hit {
                out.set(x as u32, y as u32, true);
            }
        }
    }
    out
}

/// Union of every finding's mask grown by `outline_px`; overlay pixels
/// outside it must be untouched.
pub fn overlay_footprint(findings: &[RegionFinding], dims: (u32, u32), outline_px: i64) -> BinaryMask {
    let mut all = BinaryMask::empty(dims.0, dims.1);
    for f in findings {
        let m = rle_decode(f.mask()).unwrap();
        all = all.union(&naive_dilate(&m, outline_px)).unwrap();
    }
    all
}

pub fn corpus_cases() -> Vec<(String, String, Value)> {
    let dir = fixtures_dir().join("parser_corpus");
    let mut names: Vec<String> = std::fs::read_dir(&dir)
        .unwrap()
        .filter_map(|e| e.ok()?.file_name().to_str()?.strip_suffix(".input.txt").map(str::to_string))
        .collect();
    names.sort();
    names
        .into_iter()
        .map(|name| {
            let input = std::fs::read_to_string(dir.join(format!("{name}.input.txt"))).unwrap();
            let expected = std::fs::read_to_string(dir.join(format!("{name}.expected.json"))).unwrap();
            (name, input, serde_json::from_str(&expected).unwrap())
        })
        .collect()
}

/// The parser's outcome in golden-file form.
pub fn corpus_actual(input: &str) -> Value {
    match parse_simplifier_output(input) {
        Ok((ParsedExplanations { entries, overall_summary, issues }, RepairReport { applied, .. })) => json!({
            "repairs": applied,
            "regions": entries,
            "overall_summary": overall_summary,
            "issues": issues,
        }),
        Err(failure) => json!({ "error": failure.class, "repairs": failure.repairs }),
    }
}
