//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines are always printed.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stancebench::aggregate::{aggregate_all, DEFAULT_DOMAIN_THRESHOLD};
use stancebench::battery::{BatteryConfig, Evaluation, TestKind};
use stancebench::corpus::{load_corpus, Corpus, Leaning, PartyAnswer, PolicyDomain};
use stancebench::modelio::{ResponseStore, SyntheticProfile};
use stancebench::promptkit::{default_templates, LabelPair};
use stancebench::seed::derive_seed;
use stancebench::stancemap::{map_response, MapperConfig, Stance};
use stancebench::stats::{cohen_kappa, krippendorff_alpha, significant_stance, SampleSet, SignificanceConfig, Verdict};

type Outcome = Result<String, String>;
type Criterion = fn() -> Outcome;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn statistical_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..25);
        let pairs: Vec<(Stance, Stance)> = (0..n)
            .map(|_| {
                let s = |b: bool| if b { Stance::Positive } else { Stance::Negative };
                (s(rng.gen()), s(rng.gen()))
            })
            .collect();
        worst = worst.max((cohen_kappa(&pairs).unwrap() - common::kappa_oracle(&pairs)).abs());
    }
    let mut compared = 0;
    for _ in 0..1000 {
        let units = rng.gen_range(2..8);
        let raters = rng.gen_range(2..5);
        let data: Vec<Vec<Option<u8>>> = (0..units)
            .map(|_| (0..raters).map(|_| rng.gen_bool(0.85).then(|| rng.gen_range(0..3))).collect())
            .collect();
        if let (Ok(a), Some(b)) = (krippendorff_alpha(&data), common::alpha_oracle(&data)) {
            worst = worst.max((a - b).abs());
            compared += 1;
        }
    }
    use Stance::{Negative as N, Positive as P};
    let a = [P, P, P, N, N, P];
    let b = [P, P, N, N, N, P];
    let kappa = cohen_kappa(&a.iter().copied().zip(b).collect::<Vec<_>>()).unwrap();
    let alpha = krippendorff_alpha(&[
        vec![Some('a'), Some('a')],
        vec![Some('a'), Some('b')],
        vec![Some('b'), Some('b')],
        vec![Some('b'), Some('b')],
    ])
    .unwrap();
    let elapsed = start.elapsed();
    check(
        worst < 1e-9
            && compared >= 900
            && (kappa - 2.0 / 3.0).abs() < 1e-9
            && (alpha - 8.0 / 15.0).abs() < 1e-9
            && elapsed < Duration::from_secs(10),
        format!(
            "max |diff| {worst:.1e} over 1000 kappa + {compared} alpha instances; kappa {kappa:.4}, alpha {alpha:.4}; {elapsed:.2?}"
        ),
    )
}

fn bootstrap_calibration() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut rate = |p: f64, want: Option<Verdict>| {
        let hits = (0..200)
            .filter(|i| {
                let k = (0..30).filter(|_| rng.gen_bool(p)).count() as u32;
                let config = SignificanceConfig {
                    seed: derive_seed(202, &[&p.to_string(), &i.to_string()]),
                    ..Default::default()
                };
                let v = significant_stance(&SampleSet::new(k, 30 - k, 0), &config);
                match want {
                    Some(w) => v == w,
                    None => v.stance().is_some(),
                }
            })
            .count();
        hits as f64 / 200.0
    };
    let high = rate(0.9, Some(Verdict::Positive));
    let fair = rate(0.5, None);
    let elapsed = start.elapsed();
    check(
        high >= 0.99 && fair <= 0.05 && elapsed < Duration::from_secs(60),
        format!("p=0.9 Positive {high:.3}; p=0.5 any verdict {fair:.3}; {elapsed:.2?}"),
    )
}

fn pass_rates(e: &Evaluation) -> BTreeMap<TestKind, f64> {
    TestKind::ALL.iter().map(|&t| (t, e.summary.test(t).mean)).collect()
}

fn battery_discrimination() -> Outcome {
    let corpus = common::generated_corpus(&[("nl", 50), ("de", 50)]);
    let agree_prob: BTreeMap<String, f64> = corpus
        .statements()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), if i % 3 == 0 { 0.05 } else { 0.95 }))
        .collect();
    let base = SyntheticProfile {
        agree_prob,
        negation_fidelity: 1.0,
        label_order_sensitivity: 0.0,
        refusal_rate: 0.0,
        seed: 303,
        ..Default::default()
    };
    let templates = default_templates();
    let config = BatteryConfig::default();
    let good = common::simulate(&corpus, &templates, base.clone(), &config);
    let no_fidelity = common::simulate(
        &corpus,
        &templates,
        SyntheticProfile {
            negation_fidelity: 0.0,
            ..base.clone()
        },
        &config,
    );
    let sensitive = common::simulate(
        &corpus,
        &templates,
        SyntheticProfile {
            label_order_sensitivity: 1.0,
            ..base
        },
        &config,
    );
    let all = good.summary.all_tests.mean;
    let (g, f, s) = (pass_rates(&good), pass_rates(&no_fidelity), pass_rates(&sensitive));

    let moved = |knob: &BTreeMap<TestKind, f64>| -> Vec<TestKind> {
        TestKind::ALL.into_iter().filter(|t| (g[t] - knob[t]).abs() > 0.5).collect()
    };
    let fidelity_moves = moved(&f);
    let sensitivity_moves = moved(&s);
    check(
        all >= 0.95
            && f[&TestKind::Negation] <= 0.05
            && f[&TestKind::Opposite] <= 0.05
            && s[&TestKind::InvertedLabels] <= 0.10
            && fidelity_moves == [TestKind::Negation, TestKind::Opposite]
            && sensitivity_moves == [TestKind::InvertedLabels],
        format!(
            "all five {all:.3}; fidelity=0: negation {:.3}, opposite {:.3}, moved {fidelity_moves:?}; \
             sensitivity=1: inverted {:.3}, moved {sensitivity_moves:?}",
            f[&TestKind::Negation],
            f[&TestKind::Opposite],
            s[&TestKind::InvertedLabels]
        ),
    )
}

fn sign_conventions() -> Outcome {
    let corpus = common::generated_corpus(&[("nl", 20), ("de", 20)]);
    let agree_prob = corpus
        .statements()
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.clone(), if i % 2 == 0 { 1.0 } else { 0.0 }))
        .collect();
    let profile = SyntheticProfile {
        agree_prob,
        negation_fidelity: 1.0,
        seed: 404,
        ..Default::default()
    };
    let e = common::simulate(&corpus, &default_templates(), profile, &BatteryConfig::default());
    let exact = |v: Option<f64>, want: f64| v == Some(want);
    let per_template_ok = e.kappas.per_template.len() == 6
        && e.kappas.per_template.values().all(|k| {
            exact(k.paraphrase, 1.0) && exact(k.negation, -1.0) && exact(k.opposite, -1.0)
        });
    let mean = |m: Option<stancebench::battery::MeanSd>| m.map(|m| m.mean);
    check(
        per_template_ok
            && exact(mean(e.kappas.paraphrase), 1.0)
            && exact(mean(e.kappas.negation), -1.0)
            && exact(mean(e.kappas.opposite), -1.0),
        format!(
            "mean kappa para {:?}, neg {:?}, opp {:?} over {} templates",
            mean(e.kappas.paraphrase),
            mean(e.kappas.negation),
            mean(e.kappas.opposite),
            e.kappas.per_template.len()
        ),
    )
}

fn fixture_corpus() -> Corpus {
    load_corpus(common::fixture("corpus.json")).unwrap()
}

fn domain_stance_exactness() -> Outcome {
    let corpus = fixture_corpus();
    let profile = SyntheticProfile {
        default_agree_prob: 1.0,
        seed: 505,
        ..Default::default()
    };
    let e = common::simulate(&corpus, &default_templates(), profile, &BatteryConfig::default());
    let agg = aggregate_all(&e.verdicts, &corpus, DEFAULT_DOMAIN_THRESHOLD).unwrap();
    let mut checked = 0;
    let mut identity = true;
    for d in &agg.domains {
        for s in d.per_template.values() {
            checked += 1;
            identity &= s.identity_holds() && s.value * f64::from(s.n_reliable) == f64::from(s.agrees) - f64::from(s.disagrees);
        }
    }
    let env = agg
        .domains
        .iter()
        .find(|d| d.domain == PolicyDomain::ExpandedEnvironmentProtection)
        .unwrap();
    let example_ok = env
        .per_template
        .values()
        .all(|s| s.n_reliable == 6 && s.agrees == 5 && s.disagrees == 1 && (s.value - 4.0 / 6.0).abs() < 1e-12);
    check(
        identity && example_ok && checked == 8 * 6,
        format!(
            "{checked} domain scores satisfy value*n = agrees-disagrees: {identity}; environment {} per template",
            env.per_template.values().next().map(|s| format!("{}/{}", s.agrees - s.disagrees, s.n_reliable)).unwrap_or_default()
        ),
    )
}

fn key_disagreement(corpus: &Corpus, a: &str, b: &str) -> f64 {
    let (pa, pb) = (corpus.party(a).unwrap(), corpus.party(b).unwrap());
    let opposed = pa
        .answers
        .iter()
        .filter(|(s, x)| {
            matches!(
                (x, pb.answers.get(*s)),
                (PartyAnswer::Agree, Some(PartyAnswer::Disagree)) | (PartyAnswer::Disagree, Some(PartyAnswer::Agree))
            )
        })
        .count();
    opposed as f64 / corpus.country_count(&pa.country) as f64
}

fn leaning_separation() -> Outcome {
    let corpus = fixture_corpus();
    let left: Vec<String> = corpus.parties().iter().filter(|p| p.leaning() == Leaning::Left).map(|p| p.id.clone()).collect();
    let right: Vec<String> = corpus.parties().iter().filter(|p| p.leaning() == Leaning::Right).map(|p| p.id.clone()).collect();
    let disagreement = left
        .iter()
        .zip(&right)
        .map(|(l, r)| key_disagreement(&corpus, l, r))
        .fold(1.0, f64::min);

    let base = SyntheticProfile::load(common::fixture("profile.json")).unwrap();
    let gap = |clones: &[String]| {
        let profile = SyntheticProfile {
            clone_parties: clones.to_vec(),
            ..base.clone()
        }
        .resolve(&corpus)
        .unwrap();
        let e = common::simulate(&corpus, &default_templates(), profile, &BatteryConfig::default());
        let agg = aggregate_all(&e.verdicts, &corpus, DEFAULT_DOMAIN_THRESHOLD).unwrap();
        let rate = |l| agg.leaning.group(l).pooled_summary.unwrap().mean;
        (rate(Leaning::Left), rate(Leaning::Right))
    };
    let (l1, r1) = gap(&left);
    let (l2, r2) = gap(&right);
    check(
        disagreement >= 0.8 && l1 - r1 >= 0.4 && r2 - l2 >= 0.4,
        format!(
            "keys disagree on {:.0}%; left clone: left {l1:.3} right {r1:.3}; right clone: left {l2:.3} right {r2:.3}",
            disagreement * 100.0
        ),
    )
}

fn enumeration_arithmetic() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.json");
    let counts = [("es", 24), ("pl", 20), ("it", 30), ("ch", 60), ("de", 38), ("hu", 37), ("nl", 30)];
    std::fs::write(&corpus, common::corpus_json(&counts)).unwrap();
    let out = Command::new(common::bin())
        .args(["plan", "--show", "0", "--corpus"])
        .arg(&corpus)
        .arg("--output-dir")
        .arg(dir.path().join("runs"))
        .output()
        .unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().find(|l| l.starts_with("prompt instances:")).unwrap_or("").to_string();
    check(out.status.success() && line == "prompt instances: 17208", format!("239 statements x 6 templates: {line:?}"))
}

fn report_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for name in ["verdicts.jsonl", "evaluation.json", "aggregate.json"] {
        out.push((name.to_string(), std::fs::read(dir.join(name)).unwrap_or_default()));
    }
    let mut entries: Vec<_> = std::fs::read_dir(dir.join("report")).unwrap().map(|e| e.unwrap().path()).collect();
    entries.sort();
    for p in entries {
        out.push((p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()));
    }
    out
}

fn determinism_and_resumability() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let corpus = common::fixture("corpus.json");
    let profile = common::fixture("profile.json");
    let common_args = |extra: &[&str]| {
        let mut c = Command::new(common::bin());
        c.arg("--corpus").arg(&corpus).arg("--profile").arg(&profile).args(["--seed", "99"]);
        c.args(extra).stdout(Stdio::null()).stderr(Stdio::null());
        c
    };
    for name in ["sim-a", "sim-b"] {
        let ok = common_args(&["simulate"]).arg("--run-dir").arg(dir.path().join(name)).status().unwrap().success();
        if !ok {
            return Err("simulate failed".into());
        }
    }
    let a = report_files(&dir.path().join("sim-a"));
    let b = report_files(&dir.path().join("sim-b"));
    let identical = a == b && a.len() == 15;

    let run = |store: &Path| {
        let mut c = common_args(&["run", "--template-ids", "t1,t6", "--samples", "30"]);
        c.arg("--store").arg(store).arg("--output-dir").arg(dir.path().join("runs"));
        c
    };
    let full_store = dir.path().join("full.jsonl");
    run(&full_store).status().unwrap();
    let interrupted_store = dir.path().join("interrupted.jsonl");
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut kills = 0;
    for _ in 0..6 {
        let mut child = run(&interrupted_store).spawn().unwrap();
        std::thread::sleep(Duration::from_millis(rng.gen_range(5..120)));
        if child.try_wait().unwrap().is_none() {
            child.kill().unwrap();
            kills += 1;
        }
        child.wait().unwrap();
    }
    let resumed = run(&interrupted_store).status().unwrap().success();
    let full = ResponseStore::open(&full_store).unwrap();
    let interrupted = ResponseStore::open(&interrupted_store).unwrap();
    let same_store = resumed && full.len() == 24 * 2 * 12 * 30 && full.content() == interrupted.content();
    check(
        identical && same_store,
        format!(
            "two simulate runs byte-identical over {} files: {identical}; store after {kills} kills + resume equals uninterrupted ({} responses): {same_store}",
            a.len(),
            full.len()
        ),
    )
}

fn mapping_fidelity() -> Outcome {
    let config = MapperConfig::default();
    let items = common::hand_labelled();
    let agree = items
        .iter()
        .filter(|(text, pos, neg, expected)| map_response(text, &LabelPair::new(pos, neg), &config) == *expected)
        .count();
    let labels = LabelPair::new("agree", "disagree");
    let trap = map_response("Disagree", &labels, &config) == Stance::Negative
        && map_response("I disagree.", &labels, &config) == Stance::Negative
        && map_response("Agree", &labels, &config) == Stance::Positive;
    check(
        items.len() == 60 && agree >= 58 && trap,
        format!("{agree}/{} hand-labelled items agree; substring trap handled: {trap}", items.len()),
    )
}

fn main() {
    let criteria: [(&str, Criterion); 9] = [
        ("statistical oracles", statistical_oracles),
        ("bootstrap calibration", bootstrap_calibration),
        ("battery discrimination", battery_discrimination),
        ("sign conventions", sign_conventions),
        ("domain stance exactness", domain_stance_exactness),
        ("leaning separation", leaning_separation),
        ("enumeration arithmetic", enumeration_arithmetic),
        ("determinism and resumability", determinism_and_resumability),
        ("mapping fidelity", mapping_fidelity),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {}: {tag} {name} ({:.2?}): {detail}", i + 1, start.elapsed());
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
