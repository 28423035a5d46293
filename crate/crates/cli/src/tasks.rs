//! One function per task kind. Each writes its files into the output
//! directory and returns their names.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use gossipfield::fluidity::{concentration_report, fluidity_with, FluidityOptions};
use gossipfield::generators::unit_generators;
use gossipfield::moments::oracles::{barbell_oracle, cayley_oracle, tree_oracle};
use gossipfield::moments::{expected_beliefs, moments, second_moments, PairSupport};
use gossipfield::network::NodeName;
use gossipfield::simulate::{
    check_initial_state, ensemble, ergodic_moments, simulate_forward, uniform_start,
    BackwardSampler, ErgodicAccumulator, EventLog, ForwardSimulator, MinMaxObserver, VoterDual,
    DEFAULT_BATCHES,
};
use gossipfield::{Error, SocialNetwork};

use crate::experiment::{Initial, OracleSpec, SampleMethod, Task};
use crate::failure::Failure;
use crate::output::{num, opt, write_json, Table};

pub struct Context<'a> {
    pub net: &'a SocialNetwork,
    pub seed: Option<u64>,
    pub out: &'a Path,
}

impl Context<'_> {
    fn seed(&self) -> u64 {
        // validation guarantees a seed for every stochastic task
        self.seed.expect("stochastic task without a seed")
    }

    fn id(&self, name: &NodeName) -> Result<usize, Failure> {
        Ok(self.net.id(&name.0)?)
    }

    fn stubborn_flag(&self, v: usize) -> String {
        u8::from(self.net.is_stubborn(v)).to_string()
    }
}

pub fn run_task(ctx: &Context, index: usize, task: &Task) -> Result<Vec<String>, Failure> {
    let stem = format!("{index:02}_{}", task.name());
    match task {
        Task::Simulate {
            horizon,
            initial,
            event_log,
        } => simulate(ctx, &stem, *horizon, initial.as_ref(), *event_log),
        Task::Ergodic {
            horizon,
            initial,
            replicas,
            pairs,
        } => ergodic(ctx, &stem, *horizon, initial.as_ref(), *replicas, pairs),
        Task::StationarySample {
            samples,
            method,
            tol,
        } => stationary_sample(ctx, &stem, *samples, *method, *tol),
        Task::Moments {} => first_and_second(ctx, &stem),
        Task::SecondMoments { pairs } => pair_moments(ctx, &stem, pairs.as_deref()),
        Task::Fluidity { time_tol } => {
            let mut opts = FluidityOptions::default();
            if let Some(t) = time_tol {
                opts.time_tol = *t;
            }
            let name = format!("{stem}.json");
            write_json(&ctx.out.join(&name), &fluidity_with(ctx.net, &opts)?)?;
            Ok(vec![name])
        }
        Task::Concentration { eps, variance } => {
            let name = format!("{stem}.json");
            write_json(
                &ctx.out.join(&name),
                &concentration_report(ctx.net, eps, *variance)?,
            )?;
            Ok(vec![name])
        }
        Task::OracleCheck { oracle, tolerance } => oracle_check(ctx, &stem, oracle, *tolerance),
    }
}

fn initial_state(net: &SocialNetwork, initial: Option<&Initial>) -> Result<Vec<f64>, Failure> {
    let x0 = match initial {
        None => {
            let (lo, hi) = net.belief_hull();
            uniform_start(net, 0.5 * (lo + hi))
        }
        Some(Initial::Uniform(x)) => uniform_start(net, *x),
        Some(Initial::Vector(x)) => x.clone(),
    };
    check_initial_state(net, &x0)?;
    Ok(x0)
}

fn simulate(
    ctx: &Context,
    stem: &str,
    horizon: f64,
    initial: Option<&Initial>,
    event_log: bool,
) -> Result<Vec<String>, Failure> {
    let net = ctx.net;
    let x0 = initial_state(net, initial)?;
    let mut range = MinMaxObserver::new(net.n());
    let mut log = EventLog::default();
    let out = if event_log {
        simulate_forward(net, &x0, horizon, ctx.seed(), &mut [&mut range, &mut log])?
    } else {
        simulate_forward(net, &x0, horizon, ctx.seed(), &mut [&mut range])?
    };
    let mut t = Table::new(&["agent", "name", "stubborn", "initial", "final", "min", "max"]);
    for v in 0..net.n() {
        t.row(vec![
            v.to_string(),
            net.name(v).to_string(),
            ctx.stubborn_flag(v),
            num(x0[v]),
            num(out.state.x[v]),
            num(range.min()[v]),
            num(range.max()[v]),
        ]);
    }
    let mut files = vec![format!("{stem}.csv")];
    t.write(&ctx.out.join(&files[0]))?;
    if event_log {
        let name = format!("{stem}_events.csv");
        let path = ctx.out.join(&name);
        let f = File::create(&path).map_err(|e| Failure::io(&name, e))?;
        log.write_csv(BufWriter::new(f))?;
        files.push(name);
    }
    Ok(files)
}

fn ergodic(
    ctx: &Context,
    stem: &str,
    horizon: f64,
    initial: Option<&Initial>,
    replicas: usize,
    extra: &[(NodeName, NodeName)],
) -> Result<Vec<String>, Failure> {
    let net = ctx.net;
    let n = net.n();
    let x0 = initial_state(net, initial)?;
    let mut pairs: Vec<(usize, usize)> = (0..n).map(|v| (v, v)).collect();
    let mut off_diagonal = Vec::new();
    for (a, b) in extra {
        let (a, b) = (ctx.id(a)?, ctx.id(b)?);
        let p = (a.min(b), a.max(b));
        if !pairs.contains(&p) {
            pairs.push(p);
        }
        off_diagonal.push(p);
    }
    let acc = if replicas == 1 {
        ergodic_moments(net, &x0, horizon, ctx.seed(), &pairs)?
    } else {
        let sim = ForwardSimulator::new(net)?;
        let batches = DEFAULT_BATCHES.div_ceil(replicas);
        let runs = ensemble(replicas, ctx.seed(), |_, mut rng| {
            let mut acc = ErgodicAccumulator::new(&x0, 0.0, horizon, &pairs, batches)?;
            sim.run(&x0, horizon, &mut rng, &mut [&mut acc])?;
            Ok::<_, Error>(acc)
        });
        let mut runs = runs.into_iter();
        let mut acc = runs.next().expect("at least one replica")?;
        for r in runs {
            acc.merge(&r?)?;
        }
        acc
    };
    let mut t = Table::new(&[
        "agent",
        "name",
        "stubborn",
        "mean",
        "mean_se",
        "variance",
        "variance_se",
    ]);
    for v in 0..n {
        t.row(vec![
            v.to_string(),
            net.name(v).to_string(),
            ctx.stubborn_flag(v),
            num(acc.mean(v)),
            num(acc.mean_se(v)),
            opt(acc.variance(v)),
            opt(acc.variance_se(v)),
        ]);
    }
    let mut files = vec![format!("{stem}.csv")];
    t.write(&ctx.out.join(&files[0]))?;
    if !off_diagonal.is_empty() {
        let mut t = Table::new(&["a", "b", "name_a", "name_b", "covariance", "covariance_se"]);
        for (a, b) in off_diagonal {
            t.row(vec![
                a.to_string(),
                b.to_string(),
                net.name(a).to_string(),
                net.name(b).to_string(),
                opt(acc.covariance(a, b)),
                opt(acc.covariance_se(a, b)),
            ]);
        }
        let name = format!("{stem}_pairs.csv");
        t.write(&ctx.out.join(&name))?;
        files.push(name);
    }
    Ok(files)
}

fn stationary_sample(
    ctx: &Context,
    stem: &str,
    samples: usize,
    method: SampleMethod,
    tol: f64,
) -> Result<Vec<String>, Failure> {
    let net = ctx.net;
    let draws = match method {
        SampleMethod::Backward => BackwardSampler::new(net)?.sample_many(samples, tol, ctx.seed())?,
        SampleMethod::Dual => VoterDual::new(net)?.sample_many(samples, ctx.seed()),
    };
    let mut header = vec!["sample".to_string(), "bound".into(), "events".into()];
    header.extend(net.names().iter().map(|n| format!("x_{n}")));
    let mut t = Table::new(&header);
    for (i, d) in draws.iter().enumerate() {
        let mut row = vec![i.to_string(), num(d.bound), d.events.to_string()];
        row.extend(d.x.iter().map(|&x| num(x)));
        t.row(row);
    }
    let name = format!("{stem}.csv");
    t.write(&ctx.out.join(&name))?;
    Ok(vec![name])
}

fn first_and_second(ctx: &Context, stem: &str) -> Result<Vec<String>, Failure> {
    let net = ctx.net;
    let sol = moments(net)?;
    let mut t = Table::new(&["agent", "name", "stubborn", "mean", "variance"]);
    for v in 0..net.n() {
        t.row(vec![
            v.to_string(),
            net.name(v).to_string(),
            ctx.stubborn_flag(v),
            num(sol.mean[v]),
            num(sol.variance[v]),
        ]);
    }
    let name = format!("{stem}.csv");
    t.write(&ctx.out.join(&name))?;
    Ok(vec![name])
}

fn pair_moments(
    ctx: &Context,
    stem: &str,
    requested: Option<&[(NodeName, NodeName)]>,
) -> Result<Vec<String>, Failure> {
    let net = ctx.net;
    let (sol, pairs) = match requested {
        None => {
            let sol = moments(net)?;
            let pairs = sol.solved_pairs();
            (sol, pairs)
        }
        Some(req) => {
            let pairs = req
                .iter()
                .map(|(a, b)| Ok((ctx.id(a)?, ctx.id(b)?)))
                .collect::<Result<Vec<_>, Failure>>()?;
            let regular: Vec<(usize, usize)> = pairs
                .iter()
                .copied()
                .filter(|&(a, b)| !net.is_stubborn(a) && !net.is_stubborn(b))
                .collect();
            (second_moments(net, &PairSupport::Pairs(regular))?, pairs)
        }
    };
    let mut t = Table::new(&[
        "a",
        "b",
        "name_a",
        "name_b",
        "second_moment",
        "covariance",
        "correlation",
    ]);
    for (a, b) in pairs {
        t.row(vec![
            a.to_string(),
            b.to_string(),
            net.name(a).to_string(),
            net.name(b).to_string(),
            opt(sol.second_moment(a, b)),
            opt(sol.covariance(a, b)),
            opt(sol.correlation(a, b)),
        ]);
    }
    let name = format!("{stem}.csv");
    t.write(&ctx.out.join(&name))?;
    Ok(vec![name])
}

fn stubborn_belief(net: &SocialNetwork, v: usize) -> Result<f64, Failure> {
    net.belief(v).ok_or_else(|| {
        Error::OraclePrecondition(format!("`{}` is not a stubborn agent", net.name(v))).into()
    })
}

fn oracle_check(
    ctx: &Context,
    stem: &str,
    oracle: &OracleSpec,
    tolerance: f64,
) -> Result<Vec<String>, Failure> {
    let net = ctx.net;
    // (quantity, oracle values, solver values)
    let mut compared: Vec<(&str, Vec<f64>, Vec<f64>)> = Vec::new();
    match oracle {
        OracleSpec::Tree { s0, s1 } => {
            let o = tree_oracle(net, ctx.id(s0)?, ctx.id(s1)?)?;
            match o.variance {
                Some(var) => {
                    let sol = moments(net)?;
                    compared.push(("mean", o.mean, sol.mean));
                    compared.push(("variance", var, sol.variance));
                }
                None => compared.push(("mean", o.mean, expected_beliefs(net)?)),
            }
        }
        OracleSpec::Barbell => {
            let n = net.n();
            let o = barbell_oracle(n, stubborn_belief(net, 0)?, stubborn_belief(net, n - 1)?)?;
            compared.push(("mean", o, expected_beliefs(net)?));
        }
        OracleSpec::Cayley {
            m,
            d,
            generators,
            s0,
            s1,
        } => {
            let (s0, s1) = (ctx.id(s0)?, ctx.id(s1)?);
            if net.stubborn().len() != 2 {
                return Err(Error::OraclePrecondition(
                    "the Cayley oracle needs exactly two stubborn agents".into(),
                )
                .into());
            }
            let (x0, x1) = (stubborn_belief(net, s0)?, stubborn_belief(net, s1)?);
            let gens = generators.clone().unwrap_or_else(|| unit_generators(*d));
            let gamma = cayley_oracle(*m, *d, &gens, s0, s1)?;
            if gamma.len() != net.n() {
                return Err(Error::OraclePrecondition(format!(
                    "the Cayley graph has {} nodes, the network {}",
                    gamma.len(),
                    net.n()
                ))
                .into());
            }
            let mean = gamma.iter().map(|g| x0 + (x1 - x0) * g).collect();
            compared.push(("mean", mean, expected_beliefs(net)?));
        }
    }
    let mut t = Table::new(&["agent", "name", "quantity", "oracle", "solver", "abs_diff"]);
    let mut worst: f64 = 0.0;
    for (quantity, o, s) in &compared {
        for v in 0..net.n() {
            let gap = (o[v] - s[v]).abs();
            worst = worst.max(gap);
            t.row(vec![
                v.to_string(),
                net.name(v).to_string(),
                quantity.to_string(),
                num(o[v]),
                num(s[v]),
                num(gap),
            ]);
        }
    }
    let name = format!("{stem}.csv");
    t.write(&ctx.out.join(&name))?;
    if !(worst <= tolerance) {
        return Err(Failure::new(
            "cli.oracle_mismatch",
            format!("largest oracle gap {worst:e} exceeds tolerance {tolerance:e}"),
        ));
    }
    Ok(vec![name])
}
