//! Acceptance suite. Each test prints one `[PASS]` or `[FAIL]` line to
//! stderr (bypassing the test harness capture) before asserting.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use common::{ok, s, synth, train as cli_train, write_config};
use mrnn::corpus::{generate_synthetic_corpus, DatasetSplit, ImageFeatureStore, SynthConfig, SyntheticCorpus, Vocabulary};
use mrnn::evaluation::{
    bleu, corpus_perplexity, default_fractions, image_to_text_queries, recall_curve, retrieval_eval, shortlist,
    text_to_image_queries, BleuMode, RankingQuery, DEFAULT_KS,
};
use mrnn::inference::{generate, sample_norm_images, GenerationConfig};
use mrnn::model::{ModelConfig, ModelParams, Variant};
use mrnn::numerics::{DenseVector, Rng};
use mrnn::training::{cost, gradient_check, train, GradCheckConfig, TrainConfig};

fn verdict(name: &str, pass: bool, detail: String) {
    let line = format!("[{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "{}", line.trim_end());
}

fn small(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        epochs,
        seed,
        batch_size: 1,
        learning_rate: 0.1,
        embed1_dim: 32,
        embed2_dim: 32,
        recurrent_dim: 64,
        multimodal_dim: 64,
        eval_every: 0,
        ..TrainConfig::default()
    }
}

/// One caption per image, every image in the training split.
fn overfit_corpus(n_images: usize, seed: u64) -> (SyntheticCorpus, Vocabulary, DatasetSplit) {
    let cfg = SynthConfig {
        n_images,
        captions_per_image: 1,
        val_fraction: 0.0,
        test_fraction: 0.0,
        ..SynthConfig::default()
    };
    let corpus = generate_synthetic_corpus(&mut Rng::new(seed), &cfg).unwrap();
    let (vocab, split) = corpus.dataset(1).unwrap();
    (corpus, vocab, split)
}

#[test]
fn gradient_fidelity() {
    let start = Instant::now();
    let report = gradient_check(&GradCheckConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let max = report.max_rel_error();
    let (instance, worst) = report.worst().unwrap();
    verdict(
        "gradient fidelity",
        report.instances.len() >= 20 && max < 1e-4 && report.passed() && secs < 30.0,
        format!(
            "{} instances, max relative error {max:.3e} (block {}, instance {instance}) < 1e-4, {secs:.2}s < 30s",
            report.instances.len(),
            worst.block
        ),
    );
}

#[test]
fn memorization_limit() {
    let start = Instant::now();
    let (corpus, vocab, split) = overfit_corpus(8, 1);
    let (params, _) = train(&small(200, 0), vocab.len(), &split, &corpus.features).unwrap();
    let ppl = corpus_perplexity(&params, &split.train, &corpus.features).unwrap();
    let exact = split
        .train
        .iter()
        .filter(|e| {
            let img = corpus.features.get(&e.image_id).unwrap();
            generate(&params, img, &GenerationConfig::default()).unwrap() == e.tokens
        })
        .count();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        "memorization limit",
        split.train.len() == 8 && ppl < 1.3 && exact == 8 && secs < 60.0,
        format!("train PPL {ppl:.4} < 1.3 after 200 epochs, {exact}/8 captions reproduced exactly, {secs:.2}s < 60s"),
    );
}

#[test]
fn uniform_model_identities() {
    let corpus = generate_synthetic_corpus(&mut Rng::new(0), &SynthConfig::default()).unwrap();
    let (vocab, split) = corpus.dataset(1).unwrap();
    let m = vocab.len() as f64;
    let mut worst_ppl = 0.0f64;
    let mut worst_bits = 0.0f64;
    for variant in [Variant::Multimodal, Variant::SimpleRnn] {
        let params = ModelParams::zeros(ModelConfig::new(variant, vocab.len(), corpus.features.dim())).unwrap();
        for examples in [&split.train, &split.val, &split.test] {
            let ppl = corpus_perplexity(&params, examples, &corpus.features).unwrap();
            worst_ppl = worst_ppl.max((ppl - m).abs());
            for lambda in [0.0, 1e-3] {
                let c = cost(&params, examples, &corpus.features, lambda).unwrap();
                worst_bits = worst_bits.max((c - m.log2()).abs());
            }
        }
    }
    verdict(
        "uniform-model identities",
        worst_ppl <= 1e-9 && worst_bits <= 1e-9,
        format!("M = {m}: |PPL - M| = {worst_ppl:.1e}, |cost - log2 M| = {worst_bits:.1e}, both <= 1e-9"),
    );
}

#[test]
fn image_conditioning_effect() {
    let start = Instant::now();
    let mut pairs = Vec::new();
    for seed in 0..3u64 {
        let corpus = generate_synthetic_corpus(&mut Rng::new(seed), &SynthConfig::default()).unwrap();
        assert_eq!(corpus.features.len(), 200);
        let (vocab, split) = corpus.dataset(1).unwrap();
        let val_ppl = |variant| {
            let cfg = TrainConfig {
                variant,
                seed,
                epochs: 20,
                embed1_dim: 32,
                embed2_dim: 32,
                recurrent_dim: 64,
                multimodal_dim: 64,
                eval_every: 0,
                ..TrainConfig::default()
            };
            let (p, _) = train(&cfg, vocab.len(), &split, &corpus.features).unwrap();
            corpus_perplexity(&p, &split.val, &corpus.features).unwrap()
        };
        pairs.push((val_ppl(Variant::Multimodal), val_ppl(Variant::SimpleRnn)));
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = pairs.iter().all(|(m, b)| *m <= 0.9 * b) && secs < 600.0;
    let detail = pairs
        .iter()
        .enumerate()
        .map(|(i, (m, b))| format!("seed {i}: m-RNN {m:.3} vs baseline {b:.3} ({:.1}% lower)", 100.0 * (1.0 - m / b)))
        .collect::<Vec<_>>()
        .join("; ");
    verdict("image-conditioning effect", pass, format!("{detail}; need >= 10% each, {secs:.1}s < 600s"));
}

/// Rank of the first groundtruth candidate by direct counting: a candidate's
/// position is one plus everything ordered before it, where equal scores
/// put non-groundtruth first and then lower ids.
fn oracle_rank(q: &RankingQuery) -> usize {
    let score: BTreeMap<usize, f64> = q.scores.iter().copied().collect();
    q.relevant
        .iter()
        .map(|g| {
            let sg = score[g];
            1 + q
                .scores
                .iter()
                .filter(|(c, sc)| {
                    c != g && (*sc > sg || (*sc == sg && (!q.relevant.contains(c) || c < g)))
                })
                .count()
        })
        .min()
        .unwrap()
}

/// Compares retrieval_eval with the counting oracle; returns a mismatch.
fn check_against_oracle(queries: &[RankingQuery]) -> Option<String> {
    let got = retrieval_eval(queries, &DEFAULT_KS).unwrap();
    let ranks: Vec<usize> = queries.iter().map(oracle_rank).collect();
    if got.ranks != ranks {
        return Some(format!("ranks {:?} != oracle {:?}", got.ranks, ranks));
    }
    for k in DEFAULT_KS {
        let want = 100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64;
        if got.r_at(k) != Some(want) {
            return Some(format!("R@{k} {:?} != oracle {want}", got.r_at(k)));
        }
    }
    let mut sorted = ranks.clone();
    sorted.sort_unstable();
    let med = sorted[(sorted.len() - 1) / 2];
    (got.median_rank != med).then(|| format!("Med r {} != oracle {med}", got.median_rank))
}

fn tie_heavy_query(rng: &mut Rng) -> RankingQuery {
    let n = 1 + rng.below(10);
    let scores: Vec<f64> = (0..n).map(|_| rng.below(4) as f64).collect();
    let mut relevant: BTreeSet<usize> = (0..n).filter(|_| rng.below(3) == 0).collect();
    if relevant.is_empty() {
        relevant.insert(rng.below(n));
    }
    RankingQuery::from_dense(&scores, relevant)
}

#[test]
fn retrieval_round_trip() {
    let (corpus, vocab, split) = overfit_corpus(50, 5);
    let (params, _) = train(&small(150, 0), vocab.len(), &split, &corpus.features).unwrap();

    let t2i = text_to_image_queries(&params, &split.train, &corpus.features).unwrap().queries;
    let ids: Vec<&str> = corpus.features.ids().collect();
    let norm_ids = sample_norm_images(&ids, 50, &mut Rng::new(0));
    let norm: Vec<&DenseVector> = norm_ids.iter().map(|id| corpus.features.get(id).unwrap()).collect();
    let i2t = image_to_text_queries(&params, &split.train, &corpus.features, &norm, None)
        .unwrap()
        .queries;
    let mt = retrieval_eval(&t2i, &DEFAULT_KS).unwrap();
    let mi = retrieval_eval(&i2t, &DEFAULT_KS).unwrap();

    let mut mismatch = check_against_oracle(&t2i).or_else(|| check_against_oracle(&i2t));
    let mut rng = Rng::new(11);
    for _ in 0..200 {
        if mismatch.is_some() {
            break;
        }
        let qs: Vec<RankingQuery> = (0..1 + rng.below(7)).map(|_| tie_heavy_query(&mut rng)).collect();
        mismatch = check_against_oracle(&qs);
    }

    let (r_t, r_i) = (mt.r_at(1).unwrap(), mi.r_at(1).unwrap());
    verdict(
        "retrieval round-trip",
        t2i.len() == 50 && i2t.len() == 50 && r_t >= 90.0 && r_i >= 90.0 && mismatch.is_none(),
        format!(
            "image retrieval R@1 {r_t:.1}%, normalized sentence retrieval R@1 {r_i:.1}% (need >= 90%); oracle {}",
            mismatch.unwrap_or_else(|| "agrees on model queries and 200 tie-heavy fixtures".into())
        ),
    );
}

fn words(s: &str) -> Vec<&str> {
    s.split_whitespace().collect()
}

/// (candidates, reference sets) per fixture.
fn bleu_fixtures() -> Vec<Vec<(&'static str, Vec<&'static str>)>> {
    vec![
        vec![("a cat sits on the mat", vec!["a cat sits on the mat"])],
        vec![("the the the the", vec!["the cat is on the mat"])],
        vec![("a b b c", vec!["a b c d"])],
        vec![("a b", vec!["a b c d e f"])],
        vec![("x y z", vec!["a b c"])],
        vec![("a b c d e f g", vec!["a b c"])],
        vec![("a b c", vec!["a b c d", "a b"])],
        vec![("a b c", vec!["a b c d e", "a"])],
        vec![("a b c d", vec!["a b c", "a b c d e"])],
        vec![("a a a b", vec!["a b a", "b a a a a"])],
        vec![("dog runs in the park", vec!["a dog runs in a park", "the dog is running"])],
        vec![
            ("a red cat", vec!["a red cat sits"]),
            ("a blue dog runs fast", vec!["a blue dog runs"]),
        ],
        vec![
            ("one two three", vec!["one two three"]),
            ("four five", vec!["six seven"]),
        ],
        vec![("a", vec!["a"]), ("b", vec!["b c"]), ("c d", vec!["c d"])],
        vec![("", vec!["a b c"]), ("a b c", vec!["a b c"])],
        vec![("a b a b a b", vec!["a b", "b a b a"])],
        vec![
            ("the man rides a horse", vec!["a man rides a horse", "the man on a horse", "man riding"]),
            ("a horse", vec!["the horse stands", "a brown horse"]),
        ],
        vec![("x x y y x x", vec!["x y x", "y y x x y"])],
        vec![
            ("a b c d e", vec!["e d c b a"]),
            ("a b c d e", vec!["a b c d e"]),
            ("a c e", vec!["a b c d e"]),
        ],
        vec![("p q r s p q r", vec!["p q r s", "q r s p q r p"])],
    ]
}

fn count_occurrences(gram: &[&str], tokens: &[&str]) -> usize {
    (0..tokens.len()).filter(|&i| i + gram.len() <= tokens.len() && &tokens[i..i + gram.len()] == gram).count()
}

/// BLEU by direct n-gram enumeration.
fn oracle_bleu(fixture: &[(&str, Vec<&str>)], n_max: usize, mode: BleuMode) -> Vec<f64> {
    let mut matched = vec![0usize; n_max + 1];
    let mut total = vec![0usize; n_max + 1];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, refs) in fixture {
        let c = words(cand);
        let rs: Vec<Vec<&str>> = refs.iter().map(|r| words(r)).collect();
        c_len += c.len();
        let mut best = rs[0].len();
        for r in &rs {
            let (d, bd) = (r.len().abs_diff(c.len()), best.abs_diff(c.len()));
            if d < bd || (d == bd && r.len() < best) {
                best = r.len();
            }
        }
        r_len += best;
        for n in 1..=n_max {
            for i in 0..c.len() {
                if i + n > c.len() {
                    continue;
                }
                let gram = &c[i..i + n];
                total[n] += 1;
                // Count each distinct n-gram once, at its first occurrence.
                if (0..i).any(|j| c[j..j + n] == *gram) {
                    continue;
                }
                let max_ref = rs.iter().map(|r| count_occurrences(gram, r)).max().unwrap();
                matched[n] += count_occurrences(gram, &c).min(max_ref);
            }
        }
    }
    let bp = if c_len == 0 {
        0.0
    } else if c_len > r_len {
        1.0
    } else {
        (1.0 - r_len as f64 / c_len as f64).exp()
    };
    let p = |n: usize| if total[n] == 0 { 0.0 } else { matched[n] as f64 / total[n] as f64 };
    (1..=n_max)
        .map(|n| match mode {
            BleuMode::OrderOnly => bp * p(n),
            BleuMode::Cumulative => bp * (1..=n).map(|k| p(k).powf(1.0 / n as f64)).product::<f64>(),
        })
        .collect()
}

/// Top-k candidates by counting, for every k: a candidate's position is the
/// number of candidates ordered before it.
fn oracle_curve(queries: &[RankingQuery], steps: usize) -> Vec<(f64, f64)> {
    (1..=steps)
        .map(|i| {
            let f = i as f64 / steps as f64;
            let sum: usize = queries
                .iter()
                .map(|q| {
                    let c = q.scores.len();
                    let k = (i * c).div_ceil(steps).max(1);
                    q.relevant
                        .iter()
                        .filter(|&&g| {
                            let sg = q.scores.iter().find(|x| x.0 == g).unwrap().1;
                            let before = q
                                .scores
                                .iter()
                                .filter(|(x, sx)| {
                                    *x != g && (*sx > sg || (*sx == sg && (!q.relevant.contains(x) || *x < g)))
                                })
                                .count();
                            before < k
                        })
                        .count()
                })
                .sum();
            (f, sum as f64 / queries.len() as f64)
        })
        .collect()
}

fn oracle_shortlist(query: &DenseVector, store: &ImageFeatureStore, size: usize) -> Vec<String> {
    let entries: Vec<(&str, &DenseVector)> = store.iter().collect();
    let dist = |v: &DenseVector| -> f64 { v.iter().zip(query.iter()).map(|(a, b)| (a - b).powi(2)).sum() };
    let mut slots = vec![String::new(); entries.len()];
    for (id, v) in &entries {
        let d = dist(v);
        let pos = entries
            .iter()
            .filter(|(o, w)| o != id && (dist(w) < d || (dist(w) == d && o < id)))
            .count();
        slots[pos] = id.to_string();
    }
    slots.truncate(size);
    slots
}

#[test]
fn metric_oracles() {
    let fixtures = bleu_fixtures();
    let mut bleu_err = 0.0f64;
    for fx in &fixtures {
        let cands: Vec<Vec<&str>> = fx.iter().map(|(c, _)| words(c)).collect();
        let refs: Vec<Vec<Vec<&str>>> = fx.iter().map(|(_, rs)| rs.iter().map(|r| words(r)).collect()).collect();
        for mode in [BleuMode::Cumulative, BleuMode::OrderOnly] {
            for n_max in 1..=4 {
                let got = bleu(&cands, &refs, n_max, mode).unwrap();
                for (g, w) in got.scores.iter().zip(oracle_bleu(fx, n_max, mode)) {
                    bleu_err = bleu_err.max((g - w).abs());
                }
            }
        }
    }

    let mut rng = Rng::new(3);
    let mut curve_cases = 0;
    let mut curve_ok = true;
    for _ in 0..300 {
        let qs: Vec<RankingQuery> = (0..1 + rng.below(4)).map(|_| tie_heavy_query(&mut rng)).collect();
        for steps in 1..=10 {
            let got = recall_curve(&qs, &default_fractions(steps)).unwrap();
            curve_ok &= got.points == oracle_curve(&qs, steps);
            curve_cases += 1;
        }
    }

    let mut shortlist_cases = 0;
    let mut shortlist_ok = true;
    for _ in 0..100 {
        let n = 1 + rng.below(10);
        let dim = 1 + rng.below(3);
        let grid = |rng: &mut Rng| (0..dim).map(|_| rng.below(3) as f64).collect::<DenseVector>();
        let mut store = ImageFeatureStore::new(dim);
        for i in 0..n {
            store.insert(format!("im{}", (i * 7) % 10), grid(&mut rng)).unwrap();
        }
        let queries: Vec<DenseVector> = (0..3).map(|_| grid(&mut rng)).collect();
        let refs: Vec<&DenseVector> = queries.iter().collect();
        for size in 1..=n {
            let got = shortlist(&refs, &store, size).unwrap();
            for (q, g) in refs.iter().zip(&got) {
                shortlist_ok &= *g == oracle_shortlist(q, &store, size);
                shortlist_cases += 1;
            }
        }
    }

    verdict(
        "metric oracles",
        fixtures.len() == 20 && bleu_err <= 1e-9 && curve_ok && shortlist_ok,
        format!(
            "BLEU on {} fixtures max |diff| {bleu_err:.1e} <= 1e-9; recall_curve {} on {curve_cases} cases; shortlist {} on {shortlist_cases} cases",
            fixtures.len(),
            if curve_ok { "exact" } else { "MISMATCH" },
            if shortlist_ok { "exact" } else { "MISMATCH" }
        ),
    );
}

fn dir_files(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap())
        })
        .collect()
}

#[test]
fn determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = synth(tmp.path(), 40, 4);
    let config = write_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cli_train(&corpus, &config, &a, &[]);
    let manifest = a.join("manifest.json");
    cli_train(&corpus, &config, &b, &["--verify-manifest", s(&manifest)]);
    let same_ckpt = std::fs::read(a.join("model.mrnm")).unwrap() == std::fs::read(b.join("model.mrnm")).unwrap();

    let t1 = tmp.path().join("t1");
    let mut args = vec!["--threads", "1", "train", "--quiet", "--config", s(&config), "--out", s(&t1)];
    let data = corpus.data_args();
    args.extend(data.iter().map(String::as_str));
    ok(&args);
    let threads_ckpt = std::fs::read(t1.join("model.mrnm")).unwrap() == std::fs::read(a.join("model.mrnm")).unwrap();

    let model = a.join("model.mrnm");
    let metrics = |threads: &str, out: &std::path::Path| {
        for cmd in [
            vec!["eval", "ppl"],
            vec!["eval", "bleu"],
            vec!["eval", "retrieval", "i2t", "--norm-images", "10"],
            vec!["eval", "retrieval", "t2i"],
            vec!["eval", "curve", "i2t", "--norm-images", "10", "--steps", "5"],
        ] {
            let mut args = vec!["--threads", threads];
            args.extend(cmd);
            args.extend(["--model", s(&model), "--out", s(out)]);
            args.extend(data.iter().map(String::as_str));
            ok(&args);
        }
        dir_files(out)
    };
    let m1 = metrics("1", &tmp.path().join("m1"));
    let m8 = metrics("8", &tmp.path().join("m8"));
    let same_metrics = m1 == m8 && m1.len() == 10;

    verdict(
        "determinism",
        same_ckpt && threads_ckpt && same_metrics,
        format!(
            "rerun checkpoint {}, --threads 1 vs default checkpoint {}, {} metric files under --threads 1 vs 8 {}",
            if same_ckpt { "byte-identical" } else { "DIFFERS" },
            if threads_ckpt { "byte-identical" } else { "DIFFERS" },
            m1.len(),
            if same_metrics { "identical" } else { "DIFFER" }
        ),
    );
}
