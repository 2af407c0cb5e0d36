//! Benchmark objectives. Every task reports values to be maximized;
//! cost-type problems are negated here.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Configuration, MixedSpace, Value, VariableSpec};

pub const PENALTY: f64 = 1e4;
pub const PROTOCOL_VERSION: u32 = 1;

/// Anything the engine can query for a value.
pub trait Objective {
    fn space(&self) -> &MixedSpace;
    fn evaluate(&mut self, cfg: &Configuration) -> Result<f64>;
    fn known_optimum(&self) -> Option<f64> {
        None
    }
}

pub fn beale(x: f64, y: f64) -> f64 {
    (1.5 - x + x * y).powi(2) + (2.25 - x + x * y * y).powi(2) + (2.625 - x + x * y.powi(3)).powi(2)
}

pub fn six_hump_camel(x: f64, y: f64) -> f64 {
    (4.0 - 2.1 * x * x + x.powi(4) / 3.0) * x * x + x * y + (-4.0 + 4.0 * y * y) * y * y
}

pub fn rosenbrock(x: f64, y: f64) -> f64 {
    100.0 * (y - x * x).powi(2) + (1.0 - x).powi(2)
}

/// Minimum of the six-hump camel function.
pub const CAMEL_MIN: f64 = -1.031_628_453_489_877;

// canonical domains used by the mixed two-function task
const FUNC2C_DOMAINS: [[[f64; 2]; 2]; 3] = [
    [[-4.5, 4.5], [-4.5, 4.5]],
    [[-3.0, 3.0], [-2.0, 2.0]],
    [[-2.048, 2.048], [-2.048, 2.048]],
];

fn func2c_term(which: usize, u: f64, v: f64) -> f64 {
    let [[ax, bx], [ay, by]] = FUNC2C_DOMAINS[which];
    let x = ax + (u + 1.0) / 2.0 * (bx - ax);
    let y = ay + (v + 1.0) / 2.0 * (by - ay);
    match which {
        0 => beale(x, y),
        1 => six_hump_camel(x, y),
        _ => rosenbrock(x, y),
    }
}

/// Ackley function with a=20, b=0.2, c=2π.
pub fn ackley(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let sq = v.iter().map(|x| x * x).sum::<f64>() / n;
    let cos = v.iter().map(|x| (2.0 * std::f64::consts::PI * x).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cos.exp() + 20.0 + std::f64::consts::E
}

pub fn pressure_vessel_cost(x1: f64, x2: f64, x3: f64, x4: f64) -> f64 {
    0.6224 * x1 * x3 * x4 + 1.7781 * x2 * x3 * x3 + 3.1661 * x1 * x1 * x4 + 19.84 * x1 * x1 * x3
}

/// Constraint values `g ≤ 0` of the vessel design.
pub fn pressure_vessel_constraints(x1: f64, x2: f64, x3: f64, x4: f64) -> [f64; 4] {
    let pi = std::f64::consts::PI;
    [
        -x1 + 0.0193 * x3,
        -x2 + 0.00954 * x3,
        -pi * x3 * x3 * x4 - 4.0 / 3.0 * pi * x3.powi(3) + 1_296_000.0,
        x4 - 240.0,
    ]
}

/// Golinski gearbox weight; `x[2]` is the pinion tooth count.
pub fn speed_reducer_weight(x: &[f64; 7]) -> f64 {
    let [x1, x2, x3, x4, x5, x6, x7] = *x;
    0.7854 * x1 * x2 * x2 * (3.3333 * x3 * x3 + 14.9334 * x3 - 43.0934) - 1.508 * x1 * (x6 * x6 + x7 * x7)
        + 7.4777 * (x6.powi(3) + x7.powi(3))
        + 0.7854 * (x4 * x6 * x6 + x5 * x7 * x7)
}

pub fn speed_reducer_constraints(x: &[f64; 7]) -> [f64; 11] {
    let [x1, x2, x3, x4, x5, x6, x7] = *x;
    [
        27.0 / (x1 * x2 * x2 * x3) - 1.0,
        397.5 / (x1 * x2 * x2 * x3 * x3) - 1.0,
        1.93 * x4.powi(3) / (x2 * x3 * x6.powi(4)) - 1.0,
        1.93 * x5.powi(3) / (x2 * x3 * x7.powi(4)) - 1.0,
        ((745.0 * x4 / (x2 * x3)).powi(2) + 16.9e6).sqrt() / (110.0 * x6.powi(3)) - 1.0,
        ((745.0 * x5 / (x2 * x3)).powi(2) + 157.5e6).sqrt() / (85.0 * x7.powi(3)) - 1.0,
        x2 * x3 / 40.0 - 1.0,
        5.0 * x2 / x1 - 1.0,
        x1 / (12.0 * x2) - 1.0,
        (1.5 * x6 + 1.9) / x4 - 1.0,
        (1.1 * x7 + 1.9) / x5 - 1.0,
    ]
}

fn penalty(g: &[f64]) -> f64 {
    PENALTY * g.iter().map(|v| v.max(0.0)).sum::<f64>()
}

/// Parameters of the two-release pollutant diffusion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpillParams {
    pub mass: f64,
    pub diffusion: f64,
    pub location: f64,
    pub delay: f64,
}

pub const SPILL_TRUTH: SpillParams = SpillParams {
    mass: 10.0,
    diffusion: 0.07,
    location: 1.505,
    delay: 30.1525,
};
pub const SPILL_LEVELS: usize = 285;
pub const SPILL_DELAY_STEP: f64 = 0.001;
const SPILL_SITES: [f64; 3] = [0.0, 1.0, 2.5];
const SPILL_TIMES: [f64; 4] = [15.0, 30.0, 45.0, 60.0];

pub fn spill_concentration(s: f64, t: f64, p: &SpillParams) -> f64 {
    let pi = std::f64::consts::PI;
    let mut c = p.mass / (4.0 * pi * p.diffusion * t).sqrt() * (-s * s / (4.0 * p.diffusion * t)).exp();
    if t > p.delay {
        let dt = t - p.delay;
        c += p.mass / (4.0 * pi * p.diffusion * dt).sqrt() * (-(s - p.location).powi(2) / (4.0 * p.diffusion * dt)).exp();
    }
    c
}

/// Delay value of discrete level `i`; the middle level is the true delay.
pub fn spill_delay_level(i: usize) -> f64 {
    SPILL_TRUTH.delay + SPILL_DELAY_STEP * (i as f64 - (SPILL_LEVELS / 2) as f64)
}

/// Sum of squared concentration errors against the reference parameters.
pub fn spill_misfit(p: &SpillParams) -> f64 {
    let mut total = 0.0;
    for &s in &SPILL_SITES {
        for &t in &SPILL_TIMES {
            total += (spill_concentration(s, t, p) - spill_concentration(s, t, &SPILL_TRUTH)).powi(2);
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskKind {
    Func2c,
    Ackley,
    PressureVessel,
    SpeedReducer,
    EnvCalibration,
    PlantedHub { hubs: Vec<usize> },
}

/// A closed-form objective over its mixed space.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: String,
    pub description: String,
    space: MixedSpace,
    kind: TaskKind,
    known_optimum: Option<f64>,
}

pub const TASK_IDS: [&str; 8] = [
    "func2c",
    "ackley53c",
    "ackley20c",
    "pressure-vessel",
    "speed-reducer",
    "env-calibration",
    "planted-hub",
    "planted-hub4",
];

impl Task {
    pub fn by_id(id: &str) -> Result<Self> {
        match id {
            "func2c" => Ok(Self::func2c()),
            "ackley53c" => Ok(Self::ackley(50, 3)),
            "ackley20c" => Ok(Self::ackley(17, 3)),
            "pressure-vessel" => Ok(Self::pressure_vessel()),
            "speed-reducer" => Ok(Self::speed_reducer()),
            "env-calibration" => Ok(Self::env_calibration()),
            "planted-hub" => Self::planted_hub(10, &[2, 7]),
            "planted-hub4" => Self::planted_hub(4, &[1]),
            other => Err(Error::UnknownTask(other.to_string())),
        }
    }

    pub fn func2c() -> Self {
        let space = MixedSpace::new(vec![
            VariableSpec::discrete("f0", 3),
            VariableSpec::discrete("f1", 3),
            VariableSpec::continuous("u", -1.0, 1.0),
            VariableSpec::continuous("v", -1.0, 1.0),
        ])
        .expect("valid space");
        Self {
            id: "func2c".into(),
            description: "sum of two selectable 2-d test functions (beale, six-hump camel, rosenbrock), negated".into(),
            space,
            kind: TaskKind::Func2c,
            known_optimum: Some(-2.0 * CAMEL_MIN),
        }
    }

    pub fn ackley(n_bin: usize, n_cont: usize) -> Self {
        let mut vars: Vec<VariableSpec> = (0..n_bin).map(|i| VariableSpec::discrete(format!("b{i}"), 2)).collect();
        vars.extend((0..n_cont).map(|i| VariableSpec::continuous(format!("c{i}"), -1.0, 1.0)));
        Self {
            id: format!("ackley{}c", n_bin + n_cont),
            description: format!("negated Ackley over {n_bin} binary and {n_cont} continuous inputs"),
            space: MixedSpace::new(vars).expect("valid space"),
            kind: TaskKind::Ackley,
            known_optimum: Some(0.0),
        }
    }

    pub fn pressure_vessel() -> Self {
        Self {
            id: "pressure-vessel".into(),
            description: "negated penalized pressure vessel cost; thicknesses are multiples of 0.0625".into(),
            space: MixedSpace::new(vec![
                VariableSpec::discrete("shell_thickness", 100),
                VariableSpec::discrete("head_thickness", 100),
                VariableSpec::continuous("radius", 10.0, 200.0),
                VariableSpec::continuous("length", 10.0, 200.0),
            ])
            .expect("valid space"),
            kind: TaskKind::PressureVessel,
            known_optimum: None,
        }
    }

    pub fn speed_reducer() -> Self {
        Self {
            id: "speed-reducer".into(),
            description: "negated penalized gearbox weight; pinion teeth 17..=28".into(),
            space: MixedSpace::new(vec![
                VariableSpec::continuous("face_width", 2.6, 3.6),
                VariableSpec::continuous("module", 0.7, 0.8),
                VariableSpec::discrete("teeth", 12),
                VariableSpec::continuous("shaft1_length", 7.3, 8.3),
                VariableSpec::continuous("shaft2_length", 7.3, 8.3),
                VariableSpec::continuous("shaft1_diameter", 2.9, 3.9),
                VariableSpec::continuous("shaft2_diameter", 5.0, 5.5),
            ])
            .expect("valid space"),
            kind: TaskKind::SpeedReducer,
            known_optimum: None,
        }
    }

    pub fn env_calibration() -> Self {
        Self {
            id: "env-calibration".into(),
            description: format!(
                "negated squared misfit of a pollutant spill model; release delay on {SPILL_LEVELS} levels"
            ),
            space: MixedSpace::new(vec![
                VariableSpec::discrete("delay", SPILL_LEVELS),
                VariableSpec::continuous("mass", 7.0, 13.0),
                VariableSpec::continuous("diffusion", 0.02, 0.12),
                VariableSpec::continuous("location", 0.01, 3.0),
            ])
            .expect("valid space"),
            kind: TaskKind::EnvCalibration,
            known_optimum: Some(0.0),
        }
    }

    /// `dim` variables alternating discrete(3) and continuous `[0, 1]`. Each
    /// non-hub variable is coupled to its nearest hub by the product of
    /// centered unit values.
    pub fn planted_hub(dim: usize, hubs: &[usize]) -> Result<Self> {
        if hubs.is_empty() || hubs.iter().any(|&h| h >= dim) {
            return Err(Error::InvalidConfiguration(format!("bad hub set {hubs:?} for {dim} variables")));
        }
        let vars = (0..dim)
            .map(|i| {
                if i % 2 == 0 {
                    VariableSpec::discrete(format!("x{i}"), 3)
                } else {
                    VariableSpec::continuous(format!("x{i}"), 0.0, 1.0)
                }
            })
            .collect();
        let mut hubs = hubs.to_vec();
        hubs.sort_unstable();
        hubs.dedup();
        let terms = dim - hubs.len();
        Ok(Self {
            id: if dim == 10 { "planted-hub".into() } else { format!("planted-hub{dim}") },
            description: format!("hub-coupled synthetic task, hubs {hubs:?}"),
            space: MixedSpace::new(vars)?,
            kind: TaskKind::PlantedHub { hubs },
            known_optimum: Some(terms as f64),
        })
    }

    pub fn kind(&self) -> &TaskKind {
        &self.kind
    }

    pub fn hubs(&self) -> &[usize] {
        match &self.kind {
            TaskKind::PlantedHub { hubs } => hubs,
            _ => &[],
        }
    }

    /// Objective value; the configuration must belong to the task space.
    pub fn value(&self, cfg: &Configuration) -> f64 {
        let x = |i: usize| cfg.values[i].as_f64();
        match &self.kind {
            TaskKind::Func2c => {
                let (u, v) = (x(2), x(3));
                -(func2c_term(cfg.discrete(0), u, v) + func2c_term(cfg.discrete(1), u, v))
            }
            TaskKind::Ackley => -ackley(&cfg.values.iter().map(|v| v.as_f64()).collect::<Vec<_>>()),
            TaskKind::PressureVessel => {
                let t1 = 0.0625 * (cfg.discrete(0) + 1) as f64;
                let t2 = 0.0625 * (cfg.discrete(1) + 1) as f64;
                let (r, l) = (x(2), x(3));
                -(pressure_vessel_cost(t1, t2, r, l) + penalty(&pressure_vessel_constraints(t1, t2, r, l)))
            }
            TaskKind::SpeedReducer => {
                let v = [x(0), x(1), 17.0 + cfg.discrete(2) as f64, x(3), x(4), x(5), x(6)];
                -(speed_reducer_weight(&v) + penalty(&speed_reducer_constraints(&v)))
            }
            TaskKind::EnvCalibration => -spill_misfit(&SpillParams {
                delay: spill_delay_level(cfg.discrete(0)),
                mass: x(1),
                diffusion: x(2),
                location: x(3),
            }),
            TaskKind::PlantedHub { hubs } => {
                let centered = |i: usize| 2.0 * self.space.unit_value(cfg, i) - 1.0;
                (0..self.space.dim())
                    .filter(|j| !hubs.contains(j))
                    .map(|j| {
                        // nearest hub by index distance, lower index on ties
                        let h = *hubs.iter().min_by_key(|&&h| (h.abs_diff(j), h)).expect("hubs non-empty");
                        centered(h) * centered(j)
                    })
                    .sum()
            }
        }
    }
}

impl Objective for Task {
    fn space(&self) -> &MixedSpace {
        &self.space
    }

    fn evaluate(&mut self, cfg: &Configuration) -> Result<f64> {
        self.space.check_configuration(cfg)?;
        Ok(self.value(cfg))
    }

    fn known_optimum(&self) -> Option<f64> {
        self.known_optimum
    }
}

#[derive(Serialize)]
struct Request<'a> {
    version: u32,
    values: &'a [Value],
}

#[derive(Deserialize)]
struct Response {
    value: f64,
}

/// Objective served by a child process over line-delimited JSON on its
/// standard streams: one `{"version":1,"values":[...]}` request, one
/// `{"value": x}` response.
pub struct ExternalObjective {
    command: String,
    space: MixedSpace,
    timeout: Duration,
    negate: bool,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl ExternalObjective {
    /// Spawns `command` through the shell. With `negate` the returned values
    /// are sign-flipped (for minimization objectives).
    pub fn spawn(command: &str, space: MixedSpace, timeout: Duration, negate: bool) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_string(),
            space,
            timeout,
            negate,
            child,
            stdin,
            lines: rx,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    fn died(&mut self, cfg: &Configuration, why: &str) -> Error {
        let status = self.child.try_wait().ok().flatten();
        log::error!("objective process died while evaluating {}: {why}", cfg.to_json());
        Error::ProcessDied(format!(
            "{why} (status {}) while evaluating {}",
            status.map_or("running".to_string(), |s| s.to_string()),
            cfg.to_json()
        ))
    }
}

impl Objective for ExternalObjective {
    fn space(&self) -> &MixedSpace {
        &self.space
    }

    fn evaluate(&mut self, cfg: &Configuration) -> Result<f64> {
        self.space.check_configuration(cfg)?;
        let line = serde_json::to_string(&Request {
            version: PROTOCOL_VERSION,
            values: &cfg.values,
        })?;
        let sent = match self.stdin.as_mut() {
            Some(stdin) => writeln!(stdin, "{line}").and_then(|_| stdin.flush()),
            None => Err(std::io::Error::from(std::io::ErrorKind::BrokenPipe)),
        };
        if let Err(e) = sent {
            return Err(self.died(cfg, &format!("write failed: {e}")));
        }
        let reply = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(self.died(cfg, &format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout),
            Err(RecvTimeoutError::Disconnected) => return Err(self.died(cfg, "closed its output")),
        };
        let parsed: Response = serde_json::from_str(reply.trim())
            .map_err(|e| Error::ProtocolError(format!("bad response `{}`: {e}", reply.trim())))?;
        if !parsed.value.is_finite() {
            return Err(Error::ProtocolError(format!("non-finite value in `{}`", reply.trim())));
        }
        Ok(if self.negate { -parsed.value } else { parsed.value })
    }
}

impl Drop for ExternalObjective {
    fn drop(&mut self) {
        drop(self.stdin.take());
        if !matches!(self.child.try_wait(), Ok(Some(_))) {
            let _ = self.child.kill();
        }
        let _ = self.child.wait();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(values: Vec<Value>) -> Configuration {
        Configuration::new(values)
    }

    #[test]
    fn classic_function_roots() {
        assert_eq!(beale(3.0, 0.5), 0.0);
        assert_eq!(rosenbrock(1.0, 1.0), 0.0);
        let c = six_hump_camel(0.0898, -0.7126);
        assert!((c - CAMEL_MIN).abs() < 1e-4, "{c}");
    }

    #[test]
    fn func2c_terms() {
        let t = Task::func2c();
        // beale root (3, 0.5) sits at unit coordinates (2/3, 1/9)
        let (u, v) = (2.0 / 3.0, 0.5 / 4.5);
        let x = cfg(vec![Value::Discrete(0), Value::Discrete(0), Value::Continuous(u), Value::Continuous(v)]);
        assert!(t.value(&x).abs() < 1e-20);
        let r = 1.0 / 2.048;
        let x = cfg(vec![Value::Discrete(2), Value::Discrete(2), Value::Continuous(r), Value::Continuous(r)]);
        assert!(t.value(&x).abs() < 1e-20);
        let x = cfg(vec![
            Value::Discrete(1),
            Value::Discrete(1),
            Value::Continuous(0.0898 / 3.0),
            Value::Continuous(-0.7126 / 2.0),
        ]);
        assert!((t.value(&x) + 2.0 * six_hump_camel(0.0898, -0.7126)).abs() < 1e-12);
    }

    fn ackley_oracle(v: &[f64]) -> f64 {
        // independent restatement
        let d = v.len() as f64;
        let mut a = 0.0;
        let mut b = 0.0;
        for x in v {
            a += x.powi(2);
            b += (std::f64::consts::TAU * x).cos();
        }
        20.0 + std::f64::consts::E - 20.0 * f64::exp(-0.2 * (a / d).sqrt()) - f64::exp(b / d)
    }

    #[test]
    fn ackley_values() {
        let t = Task::ackley(50, 3);
        let zero: Vec<Value> = (0..50).map(|_| Value::Discrete(0)).chain((0..3).map(|_| Value::Continuous(0.0))).collect();
        assert!(t.value(&cfg(zero)).abs() < 1e-12);
        let ones: Vec<Value> = (0..50).map(|_| Value::Discrete(1)).chain((0..3).map(|_| Value::Continuous(0.0))).collect();
        assert!(t.value(&cfg(ones)) < 0.0);
        let all: Vec<Value> = (0..50).map(|_| Value::Discrete(1)).chain((0..3).map(|_| Value::Continuous(1.0))).collect();
        assert!((t.value(&cfg(all)) + ackley_oracle(&[1.0; 53])).abs() < 1e-10);
    }

    #[test]
    fn small_ackley_agrees_with_formula() {
        let small = Task::ackley(17, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = small.space().sample_uniform(&mut rng);
            let v: Vec<f64> = x.values.iter().map(|v| v.as_f64()).collect();
            assert_relative_eq!(small.value(&x), -ackley_oracle(&v), max_relative = 1e-12);
        }
    }

    #[test]
    fn pressure_vessel_values() {
        assert!((pressure_vessel_cost(1.0, 1.0, 50.0, 100.0) - 8865.86).abs() < 0.01);
        let t = Task::pressure_vessel();
        // thickness 0.0625 is too thin for radius 150
        let x = cfg(vec![Value::Discrete(0), Value::Discrete(0), Value::Continuous(150.0), Value::Continuous(50.0)]);
        assert!(t.value(&x) < -pressure_vessel_cost(0.0625, 0.0625, 150.0, 50.0));
    }

    #[test]
    fn pressure_vessel_literature_design_is_feasible() {
        let (x1, x2, x3, x4) = (0.8125, 0.4375, 42.098_446, 176.636_596);
        let g = pressure_vessel_constraints(x1, x2, x3, x4);
        assert!(g.iter().all(|v| *v <= 1e-2), "{g:?}");
        assert!((pressure_vessel_cost(x1, x2, x3, x4) - 6059.71).abs() < 0.1);
    }

    #[test]
    fn speed_reducer_values() {
        let p = [3.5, 0.7, 17.0, 7.3, 7.715_319, 3.350_214, 5.286_654];
        let w = speed_reducer_weight(&p);
        assert!((w - 2994.0).abs() < 1.0, "{w}");
        assert!(speed_reducer_constraints(&p).iter().all(|g| *g <= 1e-3));
        let mut wider = p;
        wider[0] = 3.55;
        assert!(speed_reducer_weight(&wider) > w);
        let t = Task::speed_reducer();
        let x = cfg(vec![
            Value::Continuous(2.6),
            Value::Continuous(0.7),
            Value::Discrete(0),
            Value::Continuous(8.3),
            Value::Continuous(8.3),
            Value::Continuous(2.9),
            Value::Continuous(5.0),
        ]);
        let raw = speed_reducer_weight(&[2.6, 0.7, 17.0, 8.3, 8.3, 2.9, 5.0]);
        assert!(t.value(&x) < -raw);
    }

    #[test]
    fn env_calibration_values() {
        let t = Task::env_calibration();
        assert_eq!(spill_delay_level(SPILL_LEVELS / 2), SPILL_TRUTH.delay);
        let truth = cfg(vec![
            Value::Discrete(SPILL_LEVELS / 2),
            Value::Continuous(10.0),
            Value::Continuous(0.07),
            Value::Continuous(1.505),
        ]);
        assert_eq!(t.value(&truth), 0.0);
        let mut next = truth.clone();
        next.values[0] = Value::Discrete(SPILL_LEVELS / 2 + 1);
        let a = t.value(&next);
        assert!(a < 0.0 && a.is_finite());
        assert_eq!(a, t.value(&next));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            assert!(t.value(&t.space().sample_uniform(&mut rng)) < 0.0);
        }
    }

    #[test]
    fn planted_hub_values() {
        let t = Task::by_id("planted-hub").unwrap();
        assert_eq!(t.hubs(), &[2, 7]);
        let neutral: Vec<Value> = (0..10)
            .map(|i| if i % 2 == 0 { Value::Discrete(1) } else { Value::Continuous(0.5) })
            .collect();
        let base = cfg(neutral.clone());
        assert_eq!(t.value(&base), 0.0);

        // push every non-hub variable up; then compare a hub move with a non-hub move
        let mut x = base.clone();
        for j in 0..10 {
            if j % 2 == 0 {
                x.values[j] = Value::Discrete(2);
            } else {
                x.values[j] = Value::Continuous(1.0);
            }
        }
        x.values[2] = Value::Discrete(1);
        let before = t.value(&x);
        let mut hub_up = x.clone();
        hub_up.values[2] = Value::Discrete(2);
        let mut leaf_up = x.clone();
        leaf_up.values[0] = Value::Discrete(1);
        let hub_gain = t.value(&hub_up) - before;
        let leaf_gain = (t.value(&leaf_up) - before).abs();
        assert!(hub_gain >= leaf_gain && hub_gain > 0.0);

        let mut swapped = x.clone();
        swapped.values[1] = Value::Continuous(0.3);
        let mut other = x.clone();
        other.values[3] = Value::Continuous(0.3);
        // variables 1 and 3 both attach to hub 2
        assert_eq!(t.value(&swapped), t.value(&other));
    }

    #[test]
    fn deterministic_and_bounded_by_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for id in TASK_IDS {
            let t = Task::by_id(id).unwrap();
            let x = t.space().sample_uniform(&mut rng);
            let v = t.value(&x);
            for _ in 0..100 {
                assert_eq!(t.value(&x).to_bits(), v.to_bits());
            }
            if let Some(best) = t.known_optimum() {
                for _ in 0..20_000 {
                    assert!(t.value(&t.space().sample_uniform(&mut rng)) <= best, "{id}");
                }
            }
        }
        assert!(matches!(Task::by_id("nope"), Err(Error::UnknownTask(_))));
    }
}
