//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sicf_core::corpus::{Dialogue, SummarySet};
use sicf_core::eval::{
    elimination_ratios, emb_f, improved_ratio, rouge_l, rouge_n, EvalSample, Metric, MetricScorer,
    SampleScores,
};
use sicf_core::fusion::{fuse_sicf, Coefficients, ScoreBundle};
use sicf_core::pipeline::{score_dialogue, Providers, ScoringConfig};
use sicf_core::providers::HashEmbedder;
use sicf_core::sicf::{MatrixKind, QualityMatrix};
use sicf_core::uncertainty::{decompose, minmax_normalize, BnnKind, PhiConfig, PhiMethod};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------
// improved ratio

/// Reported (score, initial, oracle, bracketed percent) rows, all in percent.
const REPORTED_TRIPLES: &[(f64, f64, f64, f64)] = &[
    (45.85, 43.90, 44.92, 191.0),
    (44.98, 43.90, 44.92, 105.0),
    (45.20, 43.90, 44.92, 127.0),
    (45.14, 43.90, 44.92, 121.0),
    (45.40, 43.90, 44.92, 147.0),
    (44.32, 43.90, 44.92, 41.0),
    (19.90, 18.49, 19.87, 102.0),
    (19.32, 18.49, 19.87, 60.0),
    (19.07, 18.49, 19.87, 42.0),
    (19.95, 18.49, 19.87, 105.0),
    (44.89, 43.74, 44.32, 198.0),
    (44.39, 43.74, 44.32, 112.0),
    (43.72, 43.74, 44.32, -3.0),
    (47.90, 46.81, 48.33, 71.0),
    (77.94, 76.60, 79.09, 53.0),
    (61.01, 59.51, 63.19, 40.0),
    (71.72, 70.02, 73.96, 43.0),
];

fn improved_ratio_reproduction() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for &(m, ini, ora, pct) in REPORTED_TRIPLES {
        let ir = improved_ratio(m, ini, ora).map_err(|e| e.to_string())?;
        worst = worst.max((ir * 100.0 - pct).abs());
    }
    let undefined = improved_ratio(1.0, 2.0, 2.0).is_err();
    let elapsed = start.elapsed();
    check(
        worst <= 1.0 && undefined && elapsed.as_secs_f64() < 1.0 && REPORTED_TRIPLES.len() >= 5,
        format!(
            "{} triples, max deviation {worst:.3} pp, equal initial/oracle rejected: {undefined}, {:.2?}",
            REPORTED_TRIPLES.len(),
            elapsed
        ),
    )
}

// ---------------------------------------------------------------------------
// BNN decomposition

fn bnn_decomposition_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_identity: f64 = 0.0;
    let mut violations = 0;
    for trial in 0..1000 {
        let k = rng.gen_range(1..=8);
        let l = rng.gen_range(1..=12);
        let values: Vec<f64> = (0..k * l)
            .map(|_| match trial % 10 {
                0 => 0.5,                                    // constant matrix
                1 => f64::from(rng.gen_range(0..3u8)) / 2.0, // exact 0, 0.5, 1 entries
                _ => rng.gen_range(-3.0..3.0),
            })
            .collect();
        let raw = QualityMatrix::new(MatrixKind::Faithfulness, k, l, values)
            .map_err(|e| e.to_string())?;
        let d = decompose(&minmax_normalize(&raw)).map_err(|e| e.to_string())?;
        worst_identity = worst_identity.max((d.predictive - d.aleatoric - d.epistemic).abs());
        let bound = l as f64 * std::f64::consts::LN_2;
        let ordered = 0.0 <= d.aleatoric
            && d.aleatoric <= d.predictive + 1e-12
            && d.predictive <= bound + 1e-12
            && d.epistemic >= 0.0;
        if !ordered {
            violations += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst_identity <= 1e-9 && violations == 0 && elapsed.as_secs_f64() < 5.0,
        format!(
            "1000 matrices, max |pred - ale - epi| = {worst_identity:.1e}, bound violations {violations}, {elapsed:.2?}"
        ),
    )
}

// ---------------------------------------------------------------------------
// metric oracles

fn random_tokens(rng: &mut ChaCha8Rng, vocab: &[&str], max_len: usize) -> Vec<String> {
    let len = rng.gen_range(1..=max_len);
    (0..len)
        .map(|_| vocab.choose(rng).unwrap().to_string())
        .collect()
}

/// Clipped n-gram overlap counted the slow way: for every distinct n-gram, count its
/// occurrences on both sides by scanning.
fn oracle_rouge_n(c: &[String], r: &[String], n: usize) -> f64 {
    let grams = |t: &[String]| -> Vec<Vec<String>> {
        if t.len() < n {
            return Vec::new();
        }
        (0..=t.len() - n).map(|i| t[i..i + n].to_vec()).collect()
    };
    let (cg, rg) = (grams(c), grams(r));
    if cg.is_empty() && rg.is_empty() {
        return if c == r { 1.0 } else { 0.0 };
    }
    let mut distinct: Vec<&Vec<String>> = cg.iter().collect();
    distinct.sort();
    distinct.dedup();
    let mut overlap = 0usize;
    for g in distinct {
        let in_c = cg.iter().filter(|x| *x == g).count();
        let in_r = rg.iter().filter(|x| *x == g).count();
        overlap += in_c.min(in_r);
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cg.len() as f64;
    let rc = overlap as f64 / rg.len() as f64;
    2.0 * p * rc / (p + rc)
}

fn is_subsequence(sub: &[&String], of: &[String]) -> bool {
    let mut it = of.iter();
    sub.iter().all(|s| it.any(|x| x == *s))
}

/// Longest common subsequence by trying every subsequence of the first list.
fn oracle_lcs(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let ones = mask.count_ones() as usize;
        if ones <= best {
            continue;
        }
        let sub: Vec<&String> = (0..a.len())
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| &a[i])
            .collect();
        if is_subsequence(&sub, b) {
            best = ones;
        }
    }
    best
}

fn oracle_rouge_l(c: &[String], r: &[String]) -> f64 {
    let lcs = oracle_lcs(c, r) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let (p, rc) = (lcs / c.len() as f64, lcs / r.len() as f64);
    2.0 * p * rc / (p + rc)
}

/// Every candidate/reference token pair is compared; similarity is 1 for equal tokens,
/// otherwise the non-negative cosine of the raw vectors.
fn oracle_emb_f(c: &[String], r: &[String], embedder: &HashEmbedder) -> f64 {
    let vec_of = |t: &String| embedder.embed_text(t).unwrap().values().to_vec();
    let cosine = |a: &[f64], b: &[f64]| {
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        dot / (na * nb)
    };
    let sim = |a: &String, b: &String| {
        if a == b {
            1.0
        } else {
            cosine(&vec_of(a), &vec_of(b)).max(0.0)
        }
    };
    let best = |from: &[String], to: &[String]| {
        from.iter()
            .map(|a| to.iter().map(|b| sim(a, b)).fold(f64::MIN, f64::max))
            .sum::<f64>()
            / from.len() as f64
    };
    let (recall, precision) = (best(r, c), best(c, r));
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn metric_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let vocab = ["a", "b", "c", "d", "e", "f"];
    let embedder = HashEmbedder::new(5);
    let (mut rouge_max, mut emb_max) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let c = random_tokens(&mut rng, &vocab, 12);
        let r = random_tokens(&mut rng, &vocab, 12);
        for n in [1, 2] {
            let got = rouge_n(&c, &r, n).map_err(|e| e.to_string())?;
            rouge_max = rouge_max.max((got - oracle_rouge_n(&c, &r, n)).abs());
        }
        rouge_max = rouge_max.max((rouge_l(&c, &r) - oracle_rouge_l(&c, &r)).abs());
        let got = emb_f(&c, &r, &|t| embedder.embed_text(t)).map_err(|e| e.to_string())?;
        emb_max = emb_max.max((got - oracle_emb_f(&c, &r, &embedder)).abs());
    }
    check(
        rouge_max <= 1e-12 && emb_max <= 1e-9,
        format!("50 pairs, max ROUGE-1/2/L deviation {rouge_max:.1e}, max emb_f deviation {emb_max:.1e}"),
    )
}

// ---------------------------------------------------------------------------
// elimination protocol

fn synthetic_samples(rng: &mut ChaCha8Rng, n: usize) -> Vec<EvalSample> {
    let vocab: Vec<String> = (0..30).map(|i| format!("w{i}")).collect();
    (0..n)
        .map(|i| {
            let len = rng.gen_range(6..=15);
            let reference: Vec<&String> = (0..len).map(|_| vocab.choose(rng).unwrap()).collect();
            let noise = rng.gen_range(0.0..1.0);
            let prediction: Vec<&String> = reference
                .iter()
                .filter_map(|t| {
                    let x: f64 = rng.gen();
                    if x < noise / 3.0 {
                        None
                    } else if x < noise {
                        Some(vocab.choose(rng).unwrap())
                    } else {
                        Some(*t)
                    }
                })
                .collect();
            let join = |t: &[&String]| t.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ");
            EvalSample {
                id: format!("s{i:03}"),
                prediction: join(&prediction),
                reference: join(&reference),
            }
        })
        .collect()
}

fn elimination_protocol_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let scorer = MetricScorer::default();
    let samples = synthetic_samples(&mut rng, 100);
    let mut dominated_points = 0;
    let mut total_points = 0;
    for metric in Metric::ALL {
        let scores = SampleScores::compute(&samples, metric, &scorer).map_err(|e| e.to_string())?;
        let oracle = scores
            .curve(&scores.oracle_order())
            .map_err(|e| e.to_string())?;
        let mut mean_random = vec![0.0; elimination_ratios().len()];
        let mut mean_random_090 = 0.0;
        for seed in 0..20 {
            let mut order = scores.ids.clone();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let curve = scores.curve(&order).map_err(|e| e.to_string())?;
            for (m, v) in mean_random.iter_mut().zip(&curve.values) {
                *m += v / 20.0;
            }
            mean_random_090 += curve.mean_0_90 / 20.0;
        }
        for (o, m) in oracle.values.iter().zip(&mean_random) {
            total_points += 1;
            if *o >= m - 1e-12 {
                dominated_points += 1;
            }
        }
        total_points += 1;
        if oracle.mean_0_90 >= mean_random_090 - 1e-12 {
            dominated_points += 1;
        }
    }

    let mut brute_failures = 0;
    let instances = 25;
    for _ in 0..instances {
        let small = synthetic_samples(&mut rng, 4);
        for metric in Metric::ALL {
            let scores =
                SampleScores::compute(&small, metric, &scorer).map_err(|e| e.to_string())?;
            let oracle = scores
                .curve(&scores.oracle_order())
                .map_err(|e| e.to_string())?;
            let mut best = f64::MIN;
            for perm in permutations(&scores.ids) {
                best = best.max(scores.curve(&perm).map_err(|e| e.to_string())?.mean_0_90);
            }
            if oracle.mean_0_90 < best - 1e-12 {
                brute_failures += 1;
            }
        }
    }
    check(
        dominated_points == total_points && brute_failures == 0,
        format!(
            "oracle >= mean of 20 random orders at {dominated_points}/{total_points} points (4 metrics, N=100); \
             oracle maximal over all 24 orders in {}/{} four-sample cases",
            instances * 4 - brute_failures,
            instances * 4
        ),
    )
}

fn permutations(items: &[String]) -> Vec<Vec<String>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// fusion

fn random_bundles(rng: &mut ChaCha8Rng) -> Vec<ScoreBundle> {
    let n = rng.gen_range(2..=40);
    // coarse values so ties occur
    let value = |rng: &mut ChaCha8Rng| f64::from(rng.gen_range(0..12u8)) / 4.0;
    (0..n)
        .map(|i| ScoreBundle {
            dialogue_id: format!("d{i:02}"),
            lambda_sein: value(rng),
            lambda_cov: value(rng),
            lambda_fai: value(rng) - 1.0,
            representative_candidate_idx: 0,
            flags: Vec::new(),
            phi: PhiConfig::default(),
        })
        .collect()
}

fn random_coefficients(rng: &mut ChaCha8Rng) -> Coefficients {
    loop {
        let c = Coefficients {
            alpha: f64::from(rng.gen_range(0..5u8)) / 4.0,
            beta: f64::from(rng.gen_range(0..5u8)) / 4.0,
            gamma: f64::from(rng.gen_range(0..5u8)) / 4.0,
        };
        if c.validate().is_ok() {
            return c;
        }
    }
}

fn column(b: &mut ScoreBundle, which: usize) -> &mut f64 {
    match which {
        0 => &mut b.lambda_sein,
        1 => &mut b.lambda_cov,
        _ => &mut b.lambda_fai,
    }
}

fn fusion_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let mut permutation_ok = 0;
    for _ in 0..100 {
        let bundles = random_bundles(&mut rng);
        let table =
            fuse_sicf(&bundles, random_coefficients(&mut rng)).map_err(|e| e.to_string())?;
        let n = bundles.len();
        let is_perm = |get: fn(&sicf_core::fusion::Deltas) -> usize| {
            let mut d: Vec<usize> = table.rows.iter().map(|r| get(&r.delta)).collect();
            d.sort_unstable();
            d == (1..=n).collect::<Vec<_>>()
        };
        if is_perm(|d| d.sein) && is_perm(|d| d.cov) && is_perm(|d| d.fai) {
            permutation_ok += 1;
        }
    }

    let mut monotone_ok = 0;
    for _ in 0..100 {
        let bundles = random_bundles(&mut rng);
        let coefficients = random_coefficients(&mut rng);
        let before = fuse_sicf(&bundles, coefficients).map_err(|e| e.to_string())?;
        let i = rng.gen_range(0..bundles.len());
        let which = rng.gen_range(0..3);
        let mut improved = bundles.clone();
        // raw scores measure uncertainty: improving one means lowering it
        *column(&mut improved[i], which) -= rng.gen_range(0.01..2.0);
        let after = fuse_sicf(&improved, coefficients).map_err(|e| e.to_string())?;
        if after.rows[i].lambda_sicf >= before.rows[i].lambda_sicf {
            monotone_ok += 1;
        }
    }

    let transforms: [fn(f64) -> f64; 4] = [
        |x| x * x * x + 2.0 * x,
        |x| 3.0 * x + 0.5,
        f64::atan,
        |x| x.exp(),
    ];
    let mut rescale_ok = 0;
    for trial in 0..100 {
        let bundles = random_bundles(&mut rng);
        let coefficients = random_coefficients(&mut rng);
        let before = fuse_sicf(&bundles, coefficients).map_err(|e| e.to_string())?;
        let which = rng.gen_range(0..3);
        let f = transforms[trial % transforms.len()];
        let mut rescaled = bundles.clone();
        for b in &mut rescaled {
            let v = column(b, which);
            *v = f(*v);
        }
        let after = fuse_sicf(&rescaled, coefficients).map_err(|e| e.to_string())?;
        let order = |t: &sicf_core::fusion::RankTable| -> Vec<String> {
            t.best_first().into_iter().map(|r| r.id.clone()).collect()
        };
        if order(&before) == order(&after)
            && before
                .rows
                .iter()
                .zip(&after.rows)
                .all(|(a, b)| a.lambda_sicf == b.lambda_sicf)
        {
            rescale_ok += 1;
        }
    }
    check(
        permutation_ok == 100 && monotone_ok == 100 && rescale_ok == 100,
        format!(
            "delta columns are permutations {permutation_ok}/100, improvement never lowers score \
             {monotone_ok}/100, rescaling keeps order {rescale_ok}/100"
        ),
    )
}

// ---------------------------------------------------------------------------
// determinism

fn toy_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy/run.toml")
}

fn read_dir_sorted(dir: &Path) -> std::io::Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        files.insert(
            path.file_name().unwrap().to_string_lossy().into_owned(),
            std::fs::read(&path)?,
        );
    }
    Ok(files)
}

fn pipeline_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = toy_config();
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        for run in 0..3 {
            let out = root.path().join(format!("t{threads}-r{run}"));
            for command in ["score", "fuse", "select", "eval-elim"] {
                let o = Command::new(env!("CARGO_BIN_EXE_sicf"))
                    .args([
                        "--config",
                        config.to_str().unwrap(),
                        "--out",
                        out.to_str().unwrap(),
                    ])
                    .args(["--threads", threads, command])
                    .output()
                    .map_err(|e| e.to_string())?;
                if !o.status.success() {
                    return Err(format!("{command}: {}", String::from_utf8_lossy(&o.stderr)));
                }
            }
            runs.push(read_dir_sorted(&out).map_err(|e| e.to_string())?);
        }
    }
    let first = &runs[0];
    let identical = runs.iter().filter(|r| *r == first).count();
    let scores = first
        .get("scores.jsonl")
        .map_or(0, |b| b.iter().filter(|&&c| c == b'\n').count());
    check(
        identical == runs.len() && first.len() == 9 && scores == 20,
        format!(
            "{identical}/{} runs byte-identical over {} artifacts (threads 1 and 4, 3 runs each, {scores} dialogues)",
            runs.len(),
            first.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// permutation invariance

const WORDS: &[&str] = &[
    "the", "a", "to", "will", "bring", "meet", "at", "and", "is", "on", "party", "cake", "train",
    "office", "dinner", "tickets", "Anna", "Ben", "Paris", "Monday", "gift", "late",
];

fn random_text(rng: &mut ChaCha8Rng, sentences: usize) -> String {
    (0..sentences)
        .map(|_| {
            let len = rng.gen_range(2..=9);
            let words: Vec<&str> = (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect();
            format!("{}.", words.join(" "))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn phi_variants() -> Vec<PhiConfig> {
    let mut v = vec![PhiConfig::new(PhiMethod::Mean, BnnKind::Predictive)];
    for method in [PhiMethod::Bnn, PhiMethod::MBnn] {
        for kind in [BnnKind::Predictive, BnnKind::Aleatoric, BnnKind::Epistemic] {
            v.push(PhiConfig::new(method, kind));
        }
    }
    v
}

fn permutation_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let providers = Providers::synthetic(9);
    let variants = phi_variants();
    let mut worst: f64 = 0.0;
    let mut comparisons = 0;
    for trial in 0..200 {
        let turns = (0..rng.gen_range(1..=5))
            .map(|_| random_text(&mut rng, 1))
            .collect();
        let dialogue = Dialogue::new(format!("p{trial}"), turns).map_err(|e| e.to_string())?;
        let k = rng.gen_range(1..=8);
        let candidates: Vec<String> = (0..k)
            .map(|_| {
                let sentences = rng.gen_range(1..=3);
                random_text(&mut rng, sentences)
            })
            .collect();
        let mut shuffled = candidates.clone();
        shuffled.shuffle(&mut rng);
        let set = |c: Vec<String>| SummarySet {
            dialogue_id: dialogue.id.clone(),
            candidates: c,
            reference: None,
        };
        let (original, permuted) = (set(candidates), set(shuffled));
        for &phi in &variants {
            let config = ScoringConfig {
                phi,
                ..ScoringConfig::default()
            };
            let a = score_dialogue(&dialogue, &original, &providers, &config)
                .map_err(|e| e.to_string())?;
            let b = score_dialogue(&dialogue, &permuted, &providers, &config)
                .map_err(|e| e.to_string())?;
            for (x, y) in [
                (a.bundle.lambda_sein, b.bundle.lambda_sein),
                (a.bundle.lambda_cov, b.bundle.lambda_cov),
                (a.bundle.lambda_fai, b.bundle.lambda_fai),
            ] {
                worst = worst.max((x - y).abs());
                comparisons += 1;
            }
        }
    }
    check(
        worst <= 1e-12,
        format!(
            "200 trials x {} phi variants, {comparisons} comparisons, max deviation {worst:.1e}",
            variants.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        ("improved-ratio reproduction", improved_ratio_reproduction),
        ("BNN decomposition suite", bnn_decomposition_suite),
        ("metric oracle equivalence", metric_oracle_equivalence),
        ("elimination-protocol sanity", elimination_protocol_sanity),
        ("fusion properties", fusion_properties),
        ("determinism", pipeline_determinism),
        ("permutation invariance", permutation_invariance),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
