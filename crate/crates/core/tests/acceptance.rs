//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.
//!
//! Criterion 6 runs the full desk-scale pipeline (five replicates of the
//! shipped default config) and dominates the runtime. Set
//! `XAPP_ACCEPTANCE_DIR` to keep its artifacts.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xapp_core::agents::{
    greedy_actions, td_loss_and_grad, train_teacher, DqnConfig, Transition, XAppSpec, XAPP1, XAPP2,
};
use xapp_core::config::RunConfig;
use xapp_core::distill::{evaluate, evaluate_logged, kl_loss_and_grad, Deployment};
use xapp_core::env::{dbm_to_watts, CellularEnv, EnvParams, JointAction};
use xapp_core::metrics::{outage_sweep, throughput_histogram};
use xapp_core::mitigation::{
    detect_direct, monitor_indirect, resolve_direct, ActionProposal, Arbiter, ControlSnapshot, IndirectVerdict,
    KpiHistory, MitigationPolicy,
};
use xapp_core::nn::{ControlSet, HeadLayout, HeadRole, LayerSpec, QNet};
use xapp_core::parallel::Execution;
use xapp_core::pipeline::{run_pipeline, RunOptions, ReportTable, SCHEME_DISTILLED, SCHEME_INDIVIDUAL, SCHEME_INDIVIDUAL_REVERSED, SCHEME_TEAM};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn default_config_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

// ---------------------------------------------------------------------------
// 1. Formula oracle

fn oracle_hata_db(d_m: f64, f_mhz: f64, hb: f64, hm: f64) -> f64 {
    let d_km = d_m.max(1.0) / 1000.0;
    let lf = f_mhz.log10();
    let a_hm = (1.1 * lf - 0.7) * hm - (1.56 * lf - 0.8);
    let l = 69.55 + 26.16 * lf - 13.82 * hb.log10() - a_hm + (44.9 - 6.55 * hb.log10()) * d_km.log10();
    l.max(0.0)
}

/// Rates (Mbps) evaluated directly from the link equations.
fn oracle_rates(p: &EnvParams, sites: &[[f64; 2]], pos: &[[f64; 2]], a: &JointAction) -> Vec<f64> {
    let (b, k) = (p.num_bs, p.num_users);
    let gain = |i: usize, j: usize| {
        let d = ((pos[i][0] - sites[j][0]).powi(2) + (pos[i][1] - sites[j][1]).powi(2)).sqrt();
        10f64.powf(-oracle_hata_db(d, p.carrier_freq_mhz, p.bs_height_m, p.ue_height_m) / 10.0)
    };
    let power_w: Vec<f64> = a.power_dbm.iter().map(|dbm| 10f64.powf(dbm / 10.0) / 1000.0).collect();
    let noise_w = 10f64.powf((p.noise_density_dbm_hz + 10.0 * (p.channel_bandwidth_mhz * 1e6).log10()) / 10.0) / 1000.0;
    let mut load = vec![0u64; b];
    for i in 0..k {
        if let Some(j) = a.serving[i] {
            load[j] += a.rb_request[i] as u64;
        }
    }
    (0..k)
        .map(|i| {
            let Some(j) = a.serving[i] else { return 0.0 };
            let rbs = if load[j] > p.total_rbs as u64 {
                (a.rb_request[i] as f64 * p.total_rbs as f64 / load[j] as f64).floor()
            } else {
                a.rb_request[i] as f64
            };
            let interference: f64 = (0..b).filter(|&m| m != j).map(|m| gain(i, m) * power_w[m]).sum();
            let sinr = gain(i, j) * power_w[j] / (noise_w + interference);
            p.rb_bandwidth_khz * 1e3 * rbs * sinr.ln_1p() / std::f64::consts::LN_2 / 1e6
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = EnvParams {
        bs_positions: Some(vec![[40.0, 60.0], [210.0, 80.0], [125.0, 220.0]]),
        ..EnvParams::default()
    };
    let mut env = CellularEnv::new(p.clone()).map_err(|e| e.to_string())?;
    let sites = env.bs_sites().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0f64;
    let mut compared = 0usize;
    for _ in 0..1000 {
        let pos: Vec<[f64; 2]> = (0..p.num_users)
            .map(|_| [rng.gen_range(0.0..=p.area_m[0]), rng.gen_range(0.0..=p.area_m[1])])
            .collect();
        let action = JointAction {
            serving: (0..p.num_users)
                .map(|_| {
                    let s = rng.gen_range(0..=p.num_bs);
                    (s > 0).then(|| s - 1)
                })
                .collect(),
            rb_request: (0..p.num_users)
                .map(|_| p.rb_options[rng.gen_range(0..p.rb_options.len())])
                .collect(),
            power_dbm: (0..p.num_bs)
                .map(|_| p.power_levels_dbm[rng.gen_range(0..p.power_levels_dbm.len())])
                .collect(),
        };
        env.set_positions(&pos).map_err(|e| e.to_string())?;
        let out = env.reapply(&action).map_err(|e| e.to_string())?;
        let want = oracle_rates(&p, &sites, &pos, &action);
        for (got, want) in out.metrics.rates_mbps.iter().zip(&want) {
            compared += 1;
            if *want == 0.0 {
                check(*got == 0.0, || format!("expected zero rate, got {got}"))?;
                continue;
            }
            let rel = (got - want).abs() / want.abs();
            worst = worst.max(rel);
        }
    }
    let elapsed = start.elapsed();
    check(worst <= 1e-9, || format!("max relative rate error {worst:e} > 1e-9"))?;
    check(elapsed < Duration::from_secs(10), || format!("took {elapsed:?}"))?;
    Ok(format!("{compared} user rates over 1000 configurations, max rel err {worst:.2e}, {elapsed:.2?}"))
}

// ---------------------------------------------------------------------------
// 2. Gradient correctness

fn rel_err(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-7 {
        (a - n).abs() / 1e-7
    } else {
        (a - n).abs() / scale
    }
}

fn fd_check(net: &QNet, loss: impl Fn(&QNet) -> (f64, Vec<f64>)) -> f64 {
    let (_, analytic) = loss(net);
    let base = net.flat_params();
    let h = 1e-6;
    let mut probe = net.clone();
    let mut worst = 0f64;
    for i in 0..base.len() {
        let mut p = base.clone();
        p[i] = base[i] + h;
        probe.set_flat_params(&p).unwrap();
        let up = loss(&probe).0;
        p[i] = base[i] - h;
        probe.set_flat_params(&p).unwrap();
        let down = loss(&probe).0;
        worst = worst.max(rel_err(analytic[i], (up - down) / (2.0 * h)));
    }
    worst
}

fn random_layout(rng: &mut ChaCha8Rng) -> HeadLayout {
    let params = EnvParams {
        num_bs: rng.gen_range(1..=3),
        num_users: rng.gen_range(1..=3),
        ..EnvParams::default()
    };
    let controls = ControlSet {
        handover: true,
        rb: rng.gen_bool(0.5),
        power: rng.gen_bool(0.5),
    };
    HeadLayout::for_controls(&params, controls)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let nets = 6;
    let mut worst_td = 0f64;
    let mut worst_kl = [0f64; 2];
    for _ in 0..nets {
        let input = rng.gen_range(3..=7);
        let hidden = vec![rng.gen_range(3..=6), rng.gen_range(3..=6)];
        let layout = random_layout(&mut rng);
        let spec = LayerSpec { input, hidden };
        let mut net = QNet::init(spec.clone(), layout.clone(), &mut rng).map_err(|e| e.to_string())?;
        // Zero biases can pin a pre-activation exactly on the ReLU kink,
        // where central differences are meaningless; jitter every parameter.
        let jittered: Vec<f64> = net.flat_params().iter().map(|w| w + rng.gen_range(-0.1..0.1)).collect();
        net.set_flat_params(&jittered).map_err(|e| e.to_string())?;
        let target = QNet::init(spec, layout.clone(), &mut rng).map_err(|e| e.to_string())?;

        let batch: Vec<Transition> = (0..4)
            .map(|i| Transition {
                observation: random_vec(&mut rng, input, 1.0),
                actions: layout.heads().iter().map(|h| rng.gen_range(0..h.width)).collect(),
                reward: rng.gen_range(-2.0..2.0),
                next_observation: random_vec(&mut rng, input, 1.0),
                done: i == 3,
                teacher_q: Some(layout.heads().iter().map(|h| random_vec(&mut rng, h.width, 3.0)).collect()),
                source: 0,
            })
            .collect();
        let refs: Vec<&Transition> = batch.iter().collect();
        worst_td = worst_td.max(fd_check(&net, |q| {
            let (l, g) = td_loss_and_grad(q, &target, &refs, 0.9, Execution::Sequential).unwrap();
            (l, g.flat())
        }));

        // Student owns every head; the source owns every other head.
        let owned: Vec<_> = layout.heads().iter().step_by(2).cloned().collect();
        let src_layout = HeadLayout::new(owned).map_err(|e| e.to_string())?;
        let routes = vec![layout.routing_from(&src_layout).map_err(|e| e.to_string())?];
        let kl_batch: Vec<Transition> = batch
            .iter()
            .map(|t| Transition {
                teacher_q: Some(src_layout.heads().iter().map(|h| random_vec(&mut rng, h.width, 3.0)).collect()),
                ..t.clone()
            })
            .collect();
        let kl_refs: Vec<&Transition> = kl_batch.iter().collect();
        for (slot, tau) in [1.0, 20.0].into_iter().enumerate() {
            worst_kl[slot] = worst_kl[slot].max(fd_check(&net, |q| {
                let (l, g) = kl_loss_and_grad(q, &kl_refs, &routes, tau, Execution::Sequential).unwrap();
                (l, g.flat())
            }));
        }
    }
    let elapsed = start.elapsed();
    let worst = worst_td.max(worst_kl[0]).max(worst_kl[1]);
    check(worst <= 1e-4, || {
        format!("max rel err td {worst_td:.2e}, kl(tau=1) {:.2e}, kl(tau=20) {:.2e}", worst_kl[0], worst_kl[1])
    })?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{nets} nets, max rel err td {worst_td:.2e}, kl(tau=1) {:.2e}, kl(tau=20) {:.2e}, {elapsed:.2?}",
        worst_kl[0], worst_kl[1]
    ))
}

// ---------------------------------------------------------------------------
// 3. Brute-force policy oracle

fn frozen_two_by_two() -> EnvParams {
    EnvParams {
        num_bs: 2,
        num_users: 2,
        bs_positions: Some(vec![[60.0, 125.0], [190.0, 125.0]]),
        user_positions: Some(vec![[95.0, 140.0], [150.0, 100.0]]),
        ue_speed_range: [0.0, 0.0],
        episode_len: 10,
        ..EnvParams::default()
    }
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let p = frozen_two_by_two();
    let spec = XAppSpec::xapp1(&p);
    let mut env = CellularEnv::new(p.clone()).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(303);

    let widths: Vec<usize> = spec.layout.heads().iter().map(|h| h.width).collect();
    let joint_actions: usize = widths.iter().product();
    let mut best = f64::NEG_INFINITY;
    for code in 0..joint_actions {
        let mut rest = code;
        let idx: Vec<usize> = widths
            .iter()
            .map(|w| {
                let i = rest % w;
                rest /= w;
                i
            })
            .collect();
        env.reset(&mut rng);
        let joint = spec.decode_standalone(&idx, &p, &env.state().serving).map_err(|e| e.to_string())?;
        best = best.max(env.reapply(&joint).map_err(|e| e.to_string())?.reward);
    }
    check(best > 0.0, || format!("optimal PF {best} is not positive; ratio undefined"))?;

    let cfg = DqnConfig {
        episodes: 3000,
        target_sync_steps: 200,
        warmup_steps: 200,
        ..DqnConfig::default()
    };
    let trained = train_teacher(&mut env, &spec, &cfg, &mut rng).map_err(|e| e.to_string())?;
    let mut obs = env.reset(&mut rng).features();
    let mut total = 0.0;
    for _ in 0..p.episode_len {
        let a = greedy_actions(&trained.net, &obs).map_err(|e| e.to_string())?;
        let joint = spec.decode_standalone(&a, &p, &env.state().serving).map_err(|e| e.to_string())?;
        let out = env.step(&joint, &mut rng).map_err(|e| e.to_string())?;
        total += out.reward;
        obs = out.observation.features();
    }
    let achieved = total / p.episode_len as f64;
    let ratio = achieved / best;
    let elapsed = start.elapsed();
    check(ratio >= 0.9, || format!("greedy PF {achieved:.4} is {:.1}% of optimum {best:.4}", 100.0 * ratio))?;
    check(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "{joint_actions} joint actions, optimum PF {best:.4}, greedy {achieved:.4} ({:.1}%) after {} episodes, {elapsed:.2?}",
        100.0 * ratio,
        cfg.episodes
    ))
}

// ---------------------------------------------------------------------------
// 4 and 6. Desk-scale pipeline

struct DeskRun {
    root: PathBuf,
    cfg: RunConfig,
    table: ReportTable,
    elapsed: Duration,
    _keep: Option<tempfile::TempDir>,
}

fn desk_run() -> Result<DeskRun, String> {
    let mut cfg = RunConfig::load(&default_config_path()).map_err(|e| e.to_string())?;
    let keep = match std::env::var_os("XAPP_ACCEPTANCE_DIR") {
        Some(dir) => {
            cfg.output_dir = PathBuf::from(dir);
            None
        }
        None => {
            let t = tempfile::tempdir().map_err(|e| e.to_string())?;
            cfg.output_dir = t.path().to_path_buf();
            Some(t)
        }
    };
    let start = Instant::now();
    let report = run_pipeline(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    let table = report.table.ok_or("pipeline produced no report table")?;
    Ok(DeskRun {
        root: cfg.output_dir.clone(),
        cfg,
        table,
        elapsed: start.elapsed(),
        _keep: keep,
    })
}

fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    r.deserialize().collect::<Result<_, _>>().map_err(|e| format!("{}: {e}", path.display()))
}

fn moving_average(xs: &[f64], w: usize) -> Vec<f64> {
    xs.windows(w).map(|s| s.iter().sum::<f64>() / w as f64).collect()
}

fn criterion_4(run: &DeskRun) -> Outcome {
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for r in 0..run.cfg.eval.seeds {
        let dir = run.root.join(format!("rep_{r}"));
        let rows = read_csv(&dir.join("distill_agreement.csv"))?;
        let ratios: Vec<(String, f64)> = rows
            .iter()
            .filter(|row| row["phase"] == "after")
            .map(|row| (row["head"].clone(), row["ratio"].parse::<f64>().unwrap()))
            .collect();
        let mean = ratios.iter().map(|(_, v)| v).sum::<f64>() / ratios.len() as f64;
        let (min_head, min) = ratios
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .cloned()
            .ok_or("no agreement rows")?;
        let losses: Vec<f64> = read_csv(&dir.join("distill_loss.csv"))?
            .iter()
            .map(|row| row["mean_kl"].parse::<f64>().unwrap())
            .collect();
        let ma = moving_average(&losses, 5);
        let worst_rise = ma.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        lines.push(format!("rep {r}: mean {mean:.3}, min {min:.3} ({min_head}), max MA rise {worst_rise:.1e}"));
        if mean < 0.9 {
            failures.push(format!("rep {r} mean held-out agreement {mean:.3} < 0.9"));
        }
        if worst_rise > 1e-3 {
            failures.push(format!("rep {r} loss moving average rose by {worst_rise:.2e}"));
        }
    }
    let detail = lines.join("; ");
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn criterion_6(run: &DeskRun) -> Outcome {
    let t = &run.table;
    let get = |s: &str| t.get(s, 10.0).ok_or_else(|| format!("report lacks {s} at 10 Mbps"));
    let distilled = get(SCHEME_DISTILLED)?;
    let individual = get(SCHEME_INDIVIDUAL)?;
    let reversed = get(SCHEME_INDIVIDUAL_REVERSED)?;
    let team = get(SCHEME_TEAM)?;
    println!("  median outage (%) at 10 Mbps over {} seeds:", run.cfg.eval.seeds);
    println!("    {:<22}{:>8.3}", SCHEME_INDIVIDUAL, individual);
    println!("    {:<22}{:>8.3}", SCHEME_INDIVIDUAL_REVERSED, reversed);
    println!("    {:<22}{:>8.3}", SCHEME_TEAM, team);
    println!("    {:<22}{:>8.3}", SCHEME_DISTILLED, distilled);
    check(distilled <= individual, || {
        format!("distilled {distilled:.3}% > individual with mitigation {individual:.3}%")
    })?;
    check(run.elapsed < Duration::from_secs(3600), || format!("pipeline took {:?}", run.elapsed))?;
    Ok(format!(
        "distilled {distilled:.2}% <= individual {individual:.2}% (reversed priority {reversed:.2}%, team {team:.2}%), pipeline {:.0?}",
        run.elapsed
    ))
}

// ---------------------------------------------------------------------------
// 5. Mitigation unit suite

fn proposal(xapp: &str, choices: &[(HeadRole, usize)]) -> ActionProposal {
    ActionProposal {
        xapp: xapp.into(),
        choices: choices.iter().copied().collect(),
        step: 0,
    }
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

fn criterion_5() -> Outcome {
    let p = EnvParams::default();
    let ho = HeadRole::Handover { user: 0 };
    let both = [proposal(XAPP1, &[(ho, 1)]), proposal(XAPP2, &[(ho, 2)])];
    let conflicts = detect_direct(&both);
    check(conflicts == vec![ho], || format!("expected one conflict, got {conflicts:?}"))?;
    let current = JointAction::baseline(&p, &vec![Some(0); p.num_users]);
    for (order, want_winner, want_bs) in [([XAPP1, XAPP2], XAPP1, 0), ([XAPP2, XAPP1], XAPP2, 1)] {
        let priority: Vec<String> = order.iter().map(|s| s.to_string()).collect();
        let (merged, resolved) =
            resolve_direct(&both, &conflicts, &priority, Some(&current), &p).map_err(|e| e.to_string())?;
        check(resolved.len() == 1 && resolved[0].winner == want_winner, || {
            format!("order {order:?}: winner {:?}", resolved.first().map(|c| &c.winner))
        })?;
        check(merged.serving[0] == Some(want_bs), || format!("order {order:?}: serving {:?}", merged.serving[0]))?;
    }

    // Boundary: a drop of exactly delta keeps, anything beyond rolls back.
    for delta in [0.0, 0.1] {
        let mut h = KpiHistory::default();
        let prev = 3.7;
        h.record(prev, ControlSnapshot::of(&current));
        let edge = prev - delta;
        check(monitor_indirect(&h, edge, delta) == IndirectVerdict::Keep, || format!("delta {delta}: drop == delta rolled back"))?;
        check(monitor_indirect(&h, prev + 1.0, delta) == IndirectVerdict::Keep, || format!("delta {delta}: gain rolled back"))?;
        let below = f64::from_bits(edge.to_bits() - 1);
        check(monitor_indirect(&h, below, delta) == IndirectVerdict::Rollback, || {
            format!("delta {delta}: drop just beyond delta kept")
        })?;
    }

    // Live trajectories: rollback flag iff PF fell by more than delta, and a
    // rollback restores the previous RB/power settings bit for bit.
    let s1 = XAppSpec::xapp1(&p);
    let s2 = XAppSpec::xapp2(&p);
    let mut rollbacks = 0;
    let mut steps = 0;
    for delta in [0.0, 0.1] {
        let policy = MitigationPolicy {
            delta,
            ..MitigationPolicy::default()
        };
        let mut env = CellularEnv::new(p.clone()).map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        env.reset(&mut rng);
        let mut arb = Arbiter::new(policy);
        arb.reset(&env);
        for step in 0..300 {
            let before = env.controls();
            let pf_before = arb.history().last().unwrap();
            let pick = |spec: &XAppSpec, rng: &mut ChaCha8Rng| -> Vec<usize> {
                spec.layout.heads().iter().map(|h| rng.gen_range(0..h.width)).collect()
            };
            let a1 = pick(&s1, &mut rng);
            let a2 = pick(&s2, &mut rng);
            let props = [
                s1.proposal(&a1, step).map_err(|e| e.to_string())?,
                s2.proposal(&a2, step).map_err(|e| e.to_string())?,
            ];
            let (verdict, out) = arb.arbitrate(&props, &mut env, &mut rng).map_err(|e| e.to_string())?;
            let rec = arb.log().last().unwrap().clone();
            steps += 1;
            check(rec.rollback_flag == (rec.pf_after < pf_before - delta), || {
                format!("delta {delta} step {step}: flag {} with pf {} -> {}", rec.rollback_flag, pf_before, rec.pf_after)
            })?;
            if verdict.rollback_applied {
                rollbacks += 1;
                let now = env.controls();
                check(now.rb_request == before.rb_request && bits(&now.power_dbm) == bits(&before.power_dbm), || {
                    format!("delta {delta} step {step}: RB/power not restored")
                })?;
                check(now.serving == verdict.action.serving, || format!("step {step}: handover was rolled back"))?;
                let powers: Vec<f64> = now.power_dbm.iter().map(|&d| dbm_to_watts(d)).collect();
                check(powers.iter().all(|w| w.is_finite()), || "non-finite power after rollback".into())?;
                check(out.reward == rec.pf_final, || "reported PF differs from restored PF".into())?;
            }
        }
    }
    check(rollbacks > 0, || "trajectories never exercised a rollback".into())?;

    // A lone proposer never produces direct conflicts.
    let d = XAppSpec::distilled(&p);
    let net = QNet::init(
        LayerSpec::standard(p.observation_len()),
        d.layout.clone(),
        &mut ChaCha8Rng::seed_from_u64(5),
    )
    .map_err(|e| e.to_string())?;
    let mut env = CellularEnv::new(p.clone()).map_err(|e| e.to_string())?;
    let run = evaluate_logged(
        &Deployment::single(d, net),
        &mut env,
        500,
        &MitigationPolicy::default(),
        true,
        true,
        &mut ChaCha8Rng::seed_from_u64(6),
    )
    .map_err(|e| e.to_string())?;
    let log = run.arbitration.ok_or("no arbitration log")?;
    check(log.len() == 500 && log.iter().all(|r| r.direct_conflicts == 0), || "single proposer logged conflicts".into())?;
    check(run.interrupts.direct_conflicts == 0 && run.interrupts.losers_discarded == 0, || {
        format!("single proposer counted {:?}", run.interrupts)
    })?;
    Ok(format!(
        "priority in both orders, delta boundaries {{0, 0.1}}, {rollbacks} bit-exact rollbacks over {steps} arbitrated steps, 500 single-proposer steps conflict-free"
    ))
}

// ---------------------------------------------------------------------------
// 7. Determinism

fn tiny_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.output_dir = out.to_path_buf();
    cfg.env.episode_len = 10;
    cfg.training.episodes = 6;
    cfg.training.warmup_steps = 20;
    cfg.training.batch_size = 8;
    cfg.training.target_sync_steps = 15;
    cfg.training.hidden = vec![8, 8];
    cfg.distill.epochs = 3;
    cfg.distill.buffer_steps = 60;
    cfg.distill.batch_size = 8;
    cfg.distill.hidden = vec![8, 8];
    cfg.eval.steps = 40;
    cfg.eval.seeds = 2;
    cfg.eval.write_rate_log = true;
    cfg
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(dir: &Path, root: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

fn criterion_7() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let modes = [Execution::Sequential, Execution::Sequential, Execution::Parallel];
    let mut trees = Vec::new();
    for (d, exec) in dirs.iter().zip(modes) {
        let cfg = tiny_config(d.path());
        run_pipeline(&cfg, RunOptions { strict: true, exec }).map_err(|e| e.to_string())?;
        trees.push(tree(d.path()));
    }
    let files = trees[0].len();
    check(files > 30, || format!("only {files} files produced"))?;
    for (i, other) in trees.iter().enumerate().skip(1) {
        let names: Vec<_> = trees[0].keys().collect();
        check(names == other.keys().collect::<Vec<_>>(), || format!("run {i} produced a different file set"))?;
        for (name, bytes) in &trees[0] {
            check(&other[name] == bytes, || format!("run {i}: {name} differs"))?;
        }
    }
    Ok(format!("{files} files byte-identical across two sequential reruns and a parallel run"))
}

// ---------------------------------------------------------------------------
// 8. Metrics integrity

fn criterion_8() -> Outcome {
    let p = EnvParams::default();
    let s1 = XAppSpec::xapp1(&p);
    let s2 = XAppSpec::xapp2(&p);
    let mk = |spec: &XAppSpec, seed| {
        QNet::init(LayerSpec::standard(p.observation_len()), spec.layout.clone(), &mut ChaCha8Rng::seed_from_u64(seed))
            .unwrap()
    };
    let dep = Deployment::Individual {
        members: vec![(s1.clone(), mk(&s1, 1)), (s2.clone(), mk(&s2, 2))],
    };
    let mut env = CellularEnv::new(p.clone()).map_err(|e| e.to_string())?;
    let run = evaluate(&dep, &mut env, 2000, &MitigationPolicy::default(), true, &mut ChaCha8Rng::seed_from_u64(8))
        .map_err(|e| e.to_string())?;
    let cfg = RunConfig::default();
    let spec = cfg.eval.metric_spec().map_err(|e| e.to_string())?;
    let mut thresholds = vec![0.0];
    thresholds.extend(&spec.thresholds_mbps);
    let sweep = outage_sweep(&run.rates_mbps, &thresholds).map_err(|e| e.to_string())?;
    check(sweep[0].outage_pct == 0.0, || format!("outage at 0 Mbps is {}", sweep[0].outage_pct))?;
    check(sweep.windows(2).all(|w| w[0].outage_pct <= w[1].outage_pct), || "outage not monotone".into())?;
    check(spec.thresholds_mbps.len() == 20, || "threshold grid is not 20 values".into())?;
    let hist = throughput_histogram(&run.rates_mbps, &spec.hist_edges).map_err(|e| e.to_string())?;
    let integral = hist.integral();
    check((integral - 1.0).abs() <= 1e-9, || format!("histogram integrates to {integral}"))?;

    let text = std::fs::read_to_string(default_config_path()).map_err(|e| e.to_string())?;
    for needle in [
        "total_rbs = 273",
        "rb_bandwidth_khz = 360.0",
        "guard_bandwidth_khz = 845.0",
        "channel_bandwidth_mhz = 100.0",
    ] {
        check(text.contains(needle), || format!("default config lacks `{needle}`"))?;
    }
    let loaded = RunConfig::load(&default_config_path()).map_err(|e| e.to_string())?;
    check(
        loaded.env.total_rbs == 273
            && loaded.env.rb_bandwidth_khz == 360.0
            && loaded.env.guard_bandwidth_khz == 845.0
            && loaded.env.channel_bandwidth_mhz == 100.0,
        || "default config parses to different constants".into(),
    )?;
    Ok(format!(
        "outage monotone over {} thresholds, histogram integral 1{:+.1e}, Table-1 grid constants present",
        thresholds.len(),
        integral - 1.0
    ))
}

// ---------------------------------------------------------------------------

/// Runs every criterion, or only those whose numbers are given as
/// arguments (`cargo test --test acceptance -- 1 5`).
fn main() {
    let wanted: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let on = |n: u8| wanted.is_empty() || wanted.contains(&n);
    let mut results: Vec<(u8, Outcome)> = Vec::new();
    let mut report = |n: u8, outcome: Outcome| {
        match &outcome {
            Ok(detail) => println!("PASS criterion {n}: {detail}"),
            Err(why) => println!("FAIL criterion {n}: {why}"),
        }
        results.push((n, outcome));
    };
    let fast: [(u8, fn() -> Outcome); 6] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (5, criterion_5),
        (7, criterion_7),
        (8, criterion_8),
    ];
    for (n, f) in fast {
        if on(n) {
            report(n, f());
        }
    }
    if on(4) || on(6) {
        match desk_run() {
            Ok(run) => {
                if on(4) {
                    report(4, criterion_4(&run));
                }
                if on(6) {
                    report(6, criterion_6(&run));
                }
            }
            Err(e) => {
                for n in [4, 6].into_iter().filter(|&n| on(n)) {
                    report(n, Err(format!("pipeline failed: {e}")));
                }
            }
        }
    }
    results.sort_by_key(|(n, _)| *n);
    println!("summary:");
    for (n, outcome) in &results {
        println!("  {} criterion {n}", if outcome.is_ok() { "PASS" } else { "FAIL" });
    }
    let failed: Vec<u8> = results.iter().filter(|(_, o)| o.is_err()).map(|(n, _)| *n).collect();
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
