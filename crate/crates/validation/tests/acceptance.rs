//! Acceptance criteria 1-11, one line each. Run with
//! `cargo test -p validation --test acceptance`.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use denoise_bench::corpus::write_synthetic_corpus;
use denoise_bench::pipeline::{cmd_denoise, cmd_eval, cmd_mix};
use denoise_bench::report::cmd_report;
use denoise_bench::{ExperimentConfig, Method};
use denoise_core::adaptive::{denoise_adaptive, init_state, Algorithm, NoiseReference, OptimizerParams};
use denoise_core::metrics::snr_improvement;
use denoise_core::signal::{mix_at_snr, AudioBuffer};
use denoise_core::synth::{
    babble_noise, external_reference_rig, frame_accuracy, frame_labels, synth_speech, white_noise, SpeechParams,
};
use denoise_core::vad::{detect, VadFeature, VadParams};
use denoise_core::wavelet::{
    balance_sparsity_crossing, denoise_wavelet, reconstruct, transform, validate_filter_table, wavelet_filters,
    ShrinkMode, ThresholdMethod, TransformKind, WaveletDenoiseConfig, WaveletFamily,
};
use http_body_util::BodyExt;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;
use validation::{verdict, Suite};

const TARGETS: [f64; 4] = [0.0, 5.0, 10.0, 15.0];
const KINDS: [TransformKind; 2] = [TransformKind::Dwt, TransformKind::Wpt];
const SEEDS: u64 = 10;

fn perfect_reconstruction() -> Result<String, String> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for family in WaveletFamily::ALL {
        let filter = wavelet_filters::<f64>(family);
        for kind in KINDS {
            for _ in 0..50 {
                let x: Vec<f64> = (0..4096).map(|_| rng.random_range(-1.0..1.0)).collect();
                let d = transform(&AudioBuffer::new(x.clone(), 8000).unwrap(), &filter, kind, 5).unwrap();
                let y = reconstruct(&d, &filter).unwrap();
                let err = x.iter().zip(y.samples()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
                worst = worst.max(err);
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-8 && secs < 30.0,
        format!("900 round trips, max |error| {worst:.2e} (limit 1e-8), {secs:.1} s (limit 30 s)"),
    )
}

fn qmf_invariants() -> Result<String, String> {
    let bad: Vec<String> = WaveletFamily::ALL
        .iter()
        .filter_map(|f| validate_filter_table(f.table()).err().map(|d| format!("{f}: {d:?}")))
        .collect();
    verdict(
        bad.is_empty(),
        if bad.is_empty() {
            "9 tables: sum = sqrt 2 within 1e-10, orthonormal within 1e-8".into()
        } else {
            bad.join("; ")
        },
    )
}

/// Expected (y, e, w) after steps (x, d) = (1, 1) then (0.5, -0.2), order 2.
fn two_step_oracle(a: Algorithm) -> [(f64, f64, [f64; 2]); 2] {
    match a {
        Algorithm::Lms => [(0.0, 1.0, [0.09, 0.0]), (0.045, -0.245, [0.078975, -0.02205])],
        Algorithm::Nlms => [
            (0.0, 1.0, [0.0891089108910891, 0.0]),
            (0.04455445544554455, -0.24455445544554455, [0.08037482319660537, -0.01746817538896747]),
        ],
        Algorithm::Rls => [
            (0.0, 1.0, [0.515331100231899, 0.0]),
            (0.2576655501159495, -0.4576655501159495, [0.46028007035416396, -0.2271696405693669]),
        ],
        Algorithm::Afa => [(0.0, 1.0, [2.0, 0.0]), (1.0, -1.2, [1.4, -1.2])],
        Algorithm::Anlms => [
            (0.0, 1.0, [1.7821782178217822, 0.0]),
            (0.8910891089108911, -1.0910891089108912, [1.3925035360678926, -0.7793493635077794]),
        ],
    }
}

fn optimizer_oracle() -> Result<String, String> {
    let mut worst = 0.0f64;
    let mut nlms_w1 = f64::NAN;
    for a in Algorithm::ALL {
        let params = OptimizerParams::defaults(a).with_order(2);
        let mut s = init_state::<f64>(&params).unwrap();
        for (k, ((x, d), (ey, ee, ew))) in [(1.0, 1.0), (0.5, -0.2)].into_iter().zip(two_step_oracle(a)).enumerate() {
            let io = s.step(&params, x, d).unwrap();
            let w = s.weights();
            for (got, want) in [(io.y, ey), (io.e, ee), (w[0], ew[0]), (w[1], ew[1])] {
                worst = worst.max((got - want).abs());
            }
            if a == Algorithm::Nlms && k == 0 {
                nlms_w1 = w[0];
            }
        }
        if a == Algorithm::Rls {
            let want = [0.509828830533643, -0.13462782200283688, -0.13462782200283688, 0.5636799593347778];
            for (p, w) in s.p_matrix().iter().zip(want) {
                worst = worst.max((p - w).abs());
            }
        }
    }
    let rls = init_state::<f64>(&OptimizerParams::defaults(Algorithm::Rls)).unwrap();
    let order = OptimizerParams::defaults(Algorithm::Rls).order;
    let p0 = rls.p_matrix();
    let diag_ok = (0..order).all(|i| (p0[i * order + i] - 1.01010).abs() < 5e-6);
    let offdiag_ok = (0..order).all(|i| (0..order).all(|j| i == j || p0[i * order + j] == 0.0));
    verdict(
        worst <= 1e-12 && (nlms_w1 - 0.089109).abs() < 5e-7 && diag_ok && offdiag_ok,
        format!(
            "5 algorithms x 2 steps, max deviation {worst:.1e} (limit 1e-12); nlms w1 = {nlms_w1:.6}; rls P(0) diagonal = {:.5}",
            p0[0]
        ),
    )
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// Evaluates E(t) - Z(t) at every distinct magnitude from scratch.
fn brute_force_crossing(coeffs: &[BigRational]) -> BigRational {
    let total: BigRational = coeffs.iter().map(|c| c * c).sum();
    if total.is_zero() {
        return BigRational::zero();
    }
    let n = q(coeffs.len() as i64, 1);
    let mut candidates: Vec<BigRational> = coeffs.iter().map(|c| c.abs()).collect();
    candidates.sort();
    candidates.dedup();
    let gap = |t: &BigRational| {
        let kept: BigRational = coeffs.iter().filter(|c| c.abs() > *t).map(|c| c * c).sum();
        let zeros = q(coeffs.iter().filter(|c| c.abs() <= *t).count() as i64, 1);
        kept / &total - zeros / &n
    };
    let mut prev: Option<(BigRational, BigRational)> = None;
    for t in candidates {
        let g = gap(&t);
        if !g.is_positive() {
            return match prev {
                None => t,
                Some((tp, gp)) => &tp + (&t - &tp) * &gp / (&gp - &g),
            };
        }
        prev = Some((t, g));
    }
    unreachable!("the largest magnitude always closes the gap")
}

fn balance_sparsity_oracle() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = Vec::new();
    for set in 0..100 {
        let len = rng.random_range(1..=256);
        let spread = rng.random_range(1..=1000);
        let coeffs: Vec<BigRational> = (0..len)
            .map(|_| {
                let scale = if rng.random_bool(0.1) { 50 } else { 1 };
                q(rng.random_range(-spread..=spread) * scale, rng.random_range(1..=64))
            })
            .collect();
        if balance_sparsity_crossing(&coeffs) != brute_force_crossing(&coeffs) {
            mismatches.push(set);
        }
    }
    verdict(
        mismatches.is_empty(),
        format!("100 exact rational sets, mismatches {mismatches:?}"),
    )
}

fn mixer_accuracy() -> Result<String, String> {
    let mut worst = 0.0f64;
    for seed in 0..SEEDS {
        let speech = synth_speech(seed, &SpeechParams::default());
        let noise = babble_noise(seed + 100, 12_000, 8000, 4);
        for t in TARGETS {
            let (_, spec) = mix_at_snr(&speech.audio, &noise, t).map_err(|e| e.to_string())?;
            worst = worst.max((spec.measured_snr_db - t).abs());
        }
    }
    verdict(
        worst <= 0.01,
        format!("{SEEDS} utterances x 4 targets, max |measured - target| {worst:.2e} dB (limit 0.01)"),
    )
}

fn convergence() -> Result<String, String> {
    let rig = external_reference_rig(1, 8.0, 0.0).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for (a, floor) in [(Algorithm::Nlms, 10.0), (Algorithm::Rls, 10.0), (Algorithm::Lms, 5.0)] {
        let start = Instant::now();
        let out = denoise_adaptive(
            &rig.noisy,
            &OptimizerParams::defaults(a),
            NoiseReference::External(&rig.reference),
        )
        .map_err(|e| e.to_string())?;
        let secs = start.elapsed().as_secs_f64();
        let imp = snr_improvement(&rig.clean, &rig.noisy, &out).map_err(|e| e.to_string())?.improvement_db;
        let pass = imp >= floor && secs < 10.0;
        ok &= pass;
        parts.push(format!(
            "{a} {imp:+.2} dB (floor {floor}) in {secs:.2} s{}",
            if pass { "" } else { " [below]" }
        ));
    }
    verdict(ok, parts.join(", "))
}

fn vad_accuracy() -> Result<String, String> {
    let params = VadParams::default();
    let mut worst = 1.0f64;
    for seed in 0..SEEDS {
        let speech = synth_speech(seed, &SpeechParams::default());
        let noise = white_noise(seed + 200, speech.audio.len(), 8000, 1.0);
        let (noisy, _) = mix_at_snr(&speech.audio, &noise, 20.0).map_err(|e| e.to_string())?;
        let decision = detect(&noisy, &params).map_err(|e| e.to_string())?;
        let truth = frame_labels(&speech.voiced, params.frame_len, params.hop);
        worst = worst.min(frame_accuracy(&decision.flags, &truth, 2));
    }
    verdict(
        worst >= 0.95,
        format!("energy mode at 20 dB, {SEEDS} seeds, worst frame accuracy {:.2}% (floor 95%)", 100.0 * worst),
    )
}

/// Clean utterance and babble for one seed, 3 s at 8 kHz.
fn synthetic_pair(seed: u64) -> (AudioBuffer<f64>, AudioBuffer<f64>) {
    let speech = synth_speech(seed, &SpeechParams::default());
    let noise = babble_noise(seed + 1000, speech.audio.len(), 8000, 4);
    (speech.audio, noise)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn wavelet_trend() -> Result<String, String> {
    let mut curve = [0.0f64; 4];
    let mut count = 0usize;
    for seed in 0..SEEDS {
        let (clean, noise) = synthetic_pair(seed);
        for (i, t) in TARGETS.into_iter().enumerate() {
            let (noisy, _) = mix_at_snr(&clean, &noise, t).map_err(|e| e.to_string())?;
            for family in WaveletFamily::ALL {
                for kind in KINDS {
                    let cfg = WaveletDenoiseConfig::new(family, kind, ThresholdMethod::Universal, ShrinkMode::Hard);
                    let out = denoise_wavelet(&noisy, &cfg).map_err(|e| e.to_string())?;
                    curve[i] += snr_improvement(&clean, &noisy, &out).map_err(|e| e.to_string())?.improvement_db;
                    if i == 0 {
                        count += 1;
                    }
                }
            }
        }
    }
    curve.iter_mut().for_each(|c| *c /= count as f64);
    let monotone = curve.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        monotone,
        format!(
            "universal/hard mean improvement over {SEEDS} seeds x 9 families x 2 kinds at 0/5/10/15 dB: {:.4} {:.4} {:.4} {:.4}",
            curve[0], curve[1], curve[2], curve[3]
        ),
    )
}

fn vad_feature_trend() -> Result<String, String> {
    let mut by_feature: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for seed in 0..SEEDS {
        let (clean, noise) = synthetic_pair(seed);
        for t in TARGETS {
            let (noisy, _) = mix_at_snr(&clean, &noise, t).map_err(|e| e.to_string())?;
            for feature in [VadFeature::Energy, VadFeature::Cepstral] {
                let decision = detect(&noisy, &VadParams::with_feature(feature)).map_err(|e| e.to_string())?;
                for a in Algorithm::ALL {
                    let out = denoise_adaptive(
                        &noisy,
                        &OptimizerParams::defaults(a),
                        NoiseReference::VadTemplate(&decision),
                    )
                    .map_err(|e| e.to_string())?;
                    let imp = snr_improvement(&clean, &noisy, &out).map_err(|e| e.to_string())?.improvement_db;
                    by_feature.entry(feature.as_str()).or_default().push(imp);
                }
            }
        }
    }
    let energy = mean(&by_feature["energy"]);
    let cepstral = mean(&by_feature["cepstral"]);
    verdict(
        energy >= cepstral,
        format!(
            "vad_reference mode, {SEEDS} seeds x 4 SNRs x 5 algorithms: energy {energy:+.3} dB vs cepstral {cepstral:+.3} dB"
        ),
    )
}

/// Full mix, denoise (both grids), eval and report into `out`.
fn pipeline_run(corpus: &Path, out: &Path, jobs: usize) -> Result<(), String> {
    let cfg = ExperimentConfig {
        clean_dir: Some(corpus.join("clean")),
        noise_file: Some(corpus.join("babble.wav")),
        output_dir: out.to_path_buf(),
        seed: 42,
        ..ExperimentConfig::default()
    };
    let check = |stage: &str, s: denoise_bench::RunSummary| {
        if s.failures.is_empty() {
            Ok(())
        } else {
            Err(format!("{stage}: {:?}", s.failures))
        }
    };
    check("mix", cmd_mix(&cfg, jobs).map_err(|e| e.to_string())?)?;
    check("wavelet", cmd_denoise(&cfg, Method::Wavelet, jobs).map_err(|e| e.to_string())?)?;
    check("adaptive", cmd_denoise(&cfg, Method::Adaptive, jobs).map_err(|e| e.to_string())?)?;
    check("eval", cmd_eval(&cfg, jobs).map_err(|e| e.to_string())?)?;
    cmd_report(&cfg, None).map_err(|e| e.to_string())?;
    Ok(())
}

fn tree_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for sub in ["", "clean", "noisy", "denoised"] {
        let d = dir.join(sub);
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                out.insert(format!("{sub}/{}", p.file_name().unwrap().to_string_lossy()), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn end_to_end_determinism() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus = tmp.path().join("corpus");
    write_synthetic_corpus(&corpus, 42, 1, 2.0).map_err(|e| e.to_string())?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline_run(&corpus, &a, 1)?;
    pipeline_run(&corpus, &b, 3)?;
    let (ta, tb) = (tree_bytes(&a), tree_bytes(&b));
    let csvs = ["/manifest.csv", "/results.csv", "/report.csv"];
    let csv_equal = csvs.iter().all(|k| ta.contains_key(*k) && ta.get(*k) == tb.get(*k));
    let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    let rows = csv::Reader::from_reader(&ta["/results.csv"][..]).records().count();
    verdict(
        csv_equal && differing.is_empty() && ta.len() == tb.len(),
        format!(
            "two runs (1 and 3 workers): {} files compared, {rows} result rows, differing {:?}",
            ta.len(),
            differing
        ),
    )
}

async fn call(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    (status, resp.into_body().collect().await.unwrap().to_bytes().to_vec())
}

fn post(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn report_req() -> Request<Body> {
    Request::get("/api/report")
        .header(header::AUTHORIZATION, "Bearer acceptance")
        .body(Body::empty())
        .unwrap()
}

/// MOS table recomputed from the raw log lines without the service's types:
/// the last rating per (session, clip) counts; sample standard deviation.
fn brute_force_mos(log: &str) -> String {
    let mut latest: BTreeMap<(String, String), (String, String, f64)> = BTreeMap::new();
    for line in log.lines().filter(|l| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).unwrap();
        if v["event"] == "rating" {
            let s = |k: &str| v[k].as_str().unwrap().to_string();
            latest.insert(
                (s("session_id"), s("clip_id")),
                (s("algorithm"), s("variant"), v["score"].as_f64().unwrap()),
            );
        }
    }
    let mut groups: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (alg, var, score) in latest.into_values() {
        groups.entry((alg, var)).or_default().push(score);
    }
    let mut out = String::from("algorithm,variant,mos,n,stddev\n");
    for ((alg, var), scores) in groups {
        let n = scores.len();
        let m = mean(&scores);
        let sd = if n > 1 {
            (scores.iter().map(|s| (s - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push_str(&format!("{alg},{var},{m:.4},{n},{sd:.4}\n"));
    }
    out
}

fn mos_config(dir: &Path) -> mos_service::Config {
    mos_service::Config {
        clip_dir: dir.to_path_buf(),
        log_path: dir.join("ratings.jsonl"),
        static_dir: None,
        admin_token: Some("acceptance".into()),
        seed: Some(11),
    }
}

async fn mos_session(app: &Router, rater: &str) -> Result<(String, Vec<String>), String> {
    let (status, body) = call(app, post("/api/sessions", json!({ "rater": rater }))).await;
    if status != StatusCode::OK {
        return Err(format!("session: {status}"));
    }
    let v: Value = serde_json::from_slice(&body).unwrap();
    let ids = v["playlist"].as_array().unwrap().iter().map(|i| i.as_str().unwrap().to_string()).collect();
    Ok((v["session_id"].as_str().unwrap().to_string(), ids))
}

async fn mos_rate(app: &Router, session: &str, clip: &str, score: u8) -> Result<(), String> {
    let (status, body) = call(
        app,
        post("/api/ratings", json!({ "session_id": session, "clip_id": clip, "score": score })),
    )
    .await;
    if status == StatusCode::OK {
        Ok(())
    } else {
        Err(format!("rating: {status} {}", String::from_utf8_lossy(&body)))
    }
}

async fn mos_report_text(app: &Router) -> Result<String, String> {
    let (status, body) = call(app, report_req()).await;
    if status != StatusCode::OK {
        return Err(format!("report: {status}"));
    }
    Ok(String::from_utf8(body).unwrap())
}

async fn mos_scenario() -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    let algorithms = ["nlms", "rls", "wavelet"];
    for (i, alg) in algorithms.iter().cycle().take(9).enumerate() {
        let name = format!("utt{i:02}_snr5__{alg}__{}.wav", if i % 2 == 0 { "energy" } else { "cepstral" });
        std::fs::write(dir.join(name), format!("RIFF{i}")).map_err(|e| e.to_string())?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let app = mos_service::router(mos_service::open(&mos_config(dir)).map_err(|e| e.to_string())?, None);
    let mut sessions = Vec::new();
    for rater in ["r1", "r2", "r3", "r4"] {
        let (sid, ids) = mos_session(&app, rater).await?;
        for id in &ids {
            mos_rate(&app, &sid, id, rng.random_range(0..=10)).await?;
        }
        // a change of mind replaces the earlier score
        mos_rate(&app, &sid, &ids[0], rng.random_range(0..=10)).await?;
        sessions.push((sid, ids));
    }
    let log = dir.join("ratings.jsonl");
    let before = mos_report_text(&app).await?;
    let brute_before = brute_force_mos(&std::fs::read_to_string(&log).unwrap());
    drop(app);

    let app = mos_service::router(mos_service::open(&mos_config(dir)).map_err(|e| e.to_string())?, None);
    let after_restart = mos_report_text(&app).await?;
    let (sid, ids) = &sessions[1];
    mos_rate(&app, sid, &ids[3], 10).await?;
    let extended = mos_report_text(&app).await?;
    let brute_extended = brute_force_mos(&std::fs::read_to_string(&log).unwrap());

    let groups = before.lines().count() - 1;
    verdict(
        before == brute_before && after_restart == before && extended == brute_extended && extended != before,
        format!(
            "4 sessions, 40 ratings incl. 4 replacements, {groups} (algorithm, variant) rows; report == log recomputation: {}; identical after restart: {}; post-restart rating reflected: {}",
            before == brute_before,
            after_restart == before,
            extended == brute_extended && extended != before
        ),
    )
}

fn mos_report_from_log() -> Result<String, String> {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?
        .block_on(mos_scenario())
}

fn main() {
    std::panic::set_hook(Box::new(|_| {}));
    let mut suite = Suite::new();
    suite.run(1, "perfect reconstruction", perfect_reconstruction);
    suite.run(2, "QMF invariants", qmf_invariants);
    suite.run(3, "optimizer two-step oracle", optimizer_oracle);
    suite.run(4, "balance-sparsity brute-force oracle", balance_sparsity_oracle);
    suite.run(5, "mixer accuracy", mixer_accuracy);
    suite.run(6, "convergence on the external-reference rig", convergence);
    suite.run(7, "VAD frame accuracy", vad_accuracy);
    suite.run(8, "wavelet improvement non-increasing in input SNR", wavelet_trend);
    suite.run(9, "energy VAD at least as good as cepstral VAD", vad_feature_trend);
    suite.run(10, "end-to-end determinism", end_to_end_determinism);
    suite.run(11, "MOS report equals log recomputation across restart", mos_report_from_log);
    std::process::exit(suite.finish());
}
