//! Lumped-element transient solver using trapezoidal companion models.
//!
//! Every reactive element is replaced, per time step, by a conductance in
//! parallel with a history current source; the resulting resistive network is
//! solved by nodal analysis. The nodal matrix only changes when a switch
//! changes state, so its LU factorization is cached between topology changes.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// One end of a branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Ground,
    /// Unknown node voltage, indexed from zero.
    Node(usize),
    /// Ideal voltage source referenced to ground.
    Source(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Element {
    Resistor { r: f64 },
    /// Resistance and inductance in series, discretized as one companion branch.
    SeriesRl { r: f64, l: f64 },
    Capacitor { c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceWaveform {
    Dc { volts: f64 },
    /// `amplitude * cos(omega * t + phase)`.
    Cosine {
        amplitude: f64,
        omega: f64,
        phase: f64,
    },
}

impl SourceWaveform {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            SourceWaveform::Dc { volts } => volts,
            SourceWaveform::Cosine {
                amplitude,
                omega,
                phase,
            } => amplitude * (omega * t + phase).cos(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Branch {
    pub from: Terminal,
    pub to: Terminal,
    pub element: Element,
    pub closed: bool,
}

/// Instantaneous network state. Branch current flows from `from` to `to`;
/// branch voltage is `v(from) - v(to)`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub node_voltages: Vec<f64>,
    pub branch_currents: Vec<f64>,
    pub branch_voltages: Vec<f64>,
}

impl State {
    pub fn zero(nodes: usize, branches: usize) -> Self {
        Self {
            time: 0.0,
            node_voltages: vec![0.0; nodes],
            branch_currents: vec![0.0; branches],
            branch_voltages: vec![0.0; branches],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network {
    nodes: usize,
    dt: f64,
    branches: Vec<Branch>,
    sources: Vec<SourceWaveform>,
    factor: Option<LuFactor>,
}

impl Network {
    pub fn new(nodes: usize, dt: f64) -> Self {
        assert!(dt > 0.0);
        Self {
            nodes,
            dt,
            branches: Vec::new(),
            sources: Vec::new(),
            factor: None,
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn sources(&self) -> &[SourceWaveform] {
        &self.sources
    }

    pub fn add_source(&mut self, waveform: SourceWaveform) -> Terminal {
        self.sources.push(waveform);
        Terminal::Source(self.sources.len() - 1)
    }

    /// Adds a branch and returns its index.
    pub fn add_branch(&mut self, from: Terminal, to: Terminal, element: Element, closed: bool) -> usize {
        for t in [from, to] {
            if let Terminal::Node(k) = t {
                assert!(k < self.nodes, "node {k} out of range");
            }
        }
        self.branches.push(Branch {
            from,
            to,
            element,
            closed,
        });
        self.factor = None;
        self.branches.len() - 1
    }

    pub fn is_closed(&self, branch: usize) -> bool {
        self.branches[branch].closed
    }

    /// Opens or closes a branch. Takes effect at the next [`Network::step`].
    ///
    /// A branch that changes state restarts from zero current and zero
    /// history, which models an ideal switch in series with the element.
    pub fn set_closed(&mut self, branch: usize, closed: bool, state: &mut State) {
        if self.branches[branch].closed != closed {
            self.branches[branch].closed = closed;
            state.branch_currents[branch] = 0.0;
            state.branch_voltages[branch] = 0.0;
            self.factor = None;
        }
    }

    fn validate(&self) -> Result<()> {
        for (k, b) in self.branches.iter().enumerate() {
            let ok = match b.element {
                Element::Resistor { r } => r > 0.0 && r.is_finite(),
                Element::SeriesRl { r, l } => r >= 0.0 && l > 0.0 && r.is_finite() && l.is_finite(),
                Element::Capacitor { c } => c > 0.0 && c.is_finite(),
            };
            if !ok {
                return Err(Error::Config(format!("branch {k} has non-physical element {:?}", b.element)));
            }
        }
        Ok(())
    }

    /// Companion conductance of a branch.
    fn conductance(&self, element: Element) -> f64 {
        match element {
            Element::Resistor { r } => 1.0 / r,
            Element::SeriesRl { r, l } => 1.0 / (r + 2.0 * l / self.dt),
            Element::Capacitor { c } => 2.0 * c / self.dt,
        }
    }

    /// Nodes with no closed branch attached are pinned to zero volts.
    fn floating_nodes(&self) -> Vec<bool> {
        let mut attached = vec![false; self.nodes];
        for b in self.branches.iter().filter(|b| b.closed) {
            for t in [b.from, b.to] {
                if let Terminal::Node(k) = t {
                    attached[k] = true;
                }
            }
        }
        attached.iter().map(|a| !a).collect()
    }

    fn assemble(&self) -> Vec<f64> {
        let n = self.nodes;
        let mut g = vec![0.0; n * n];
        for b in self.branches.iter().filter(|b| b.closed) {
            let y = self.conductance(b.element);
            stamp(&mut g, n, b.from, b.to, y);
        }
        for (k, floating) in self.floating_nodes().into_iter().enumerate() {
            if floating {
                g[k * n + k] = 1.0;
            }
        }
        g
    }

    fn terminal_voltage(&self, t: Terminal, node_voltages: &[f64], time: f64) -> f64 {
        match t {
            Terminal::Ground => 0.0,
            Terminal::Node(k) => node_voltages[k],
            Terminal::Source(s) => self.sources[s].at(time),
        }
    }

    /// Advances the state by one trapezoidal step of length `dt`.
    pub fn step(&mut self, state: &mut State) -> Result<()> {
        if self.factor.is_none() {
            self.validate()?;
            let g = self.assemble();
            self.factor = Some(LuFactor::new(g, self.nodes)?);
        }
        let t_next = state.time + self.dt;
        let n = self.nodes;

        // Branch current = y * v_branch + hist.
        let mut hist = vec![0.0; self.branches.len()];
        let mut rhs = vec![0.0; n];
        for (k, b) in self.branches.iter().enumerate() {
            if !b.closed {
                continue;
            }
            let y = self.conductance(b.element);
            let (i_prev, v_prev) = (state.branch_currents[k], state.branch_voltages[k]);
            hist[k] = match b.element {
                Element::Resistor { .. } => 0.0,
                Element::SeriesRl { r, l } => y * (v_prev + (2.0 * l / self.dt - r) * i_prev),
                Element::Capacitor { .. } => -(y * v_prev + i_prev),
            };
            if let Terminal::Node(a) = b.from {
                rhs[a] -= hist[k];
                if let Some(v) = self.known_voltage(b.to, t_next) {
                    rhs[a] += y * v;
                }
            }
            if let Terminal::Node(c) = b.to {
                rhs[c] += hist[k];
                if let Some(v) = self.known_voltage(b.from, t_next) {
                    rhs[c] += y * v;
                }
            }
        }
        let factor = self.factor.as_ref().expect("factorized above");
        let v = factor.solve(&rhs);
        for (k, b) in self.branches.iter().enumerate() {
            if !b.closed {
                state.branch_currents[k] = 0.0;
                state.branch_voltages[k] = 0.0;
                continue;
            }
            let vb = self.terminal_voltage(b.from, &v, t_next) - self.terminal_voltage(b.to, &v, t_next);
            state.branch_voltages[k] = vb;
            state.branch_currents[k] = self.conductance(b.element) * vb + hist[k];
        }
        state.node_voltages = v;
        state.time = t_next;
        Ok(())
    }

    fn known_voltage(&self, t: Terminal, time: f64) -> Option<f64> {
        match t {
            Terminal::Ground => Some(0.0),
            Terminal::Source(s) => Some(self.sources[s].at(time)),
            Terminal::Node(_) => None,
        }
    }

    /// Sinusoidal steady state of the current topology at angular frequency
    /// `omega`, evaluated at `t = 0`.
    ///
    /// Reactances use the frequency response of the trapezoidal integrator
    /// (`tan(omega*dt/2)` in place of `omega*dt/2`), so stepping from the
    /// returned state continues the steady state without a start-up transient.
    /// DC sources are not supported here.
    pub fn steady_state(&self, omega: f64) -> Result<State> {
        self.validate()?;
        let n = self.nodes;
        let warp = (2.0 / self.dt) * (omega * self.dt / 2.0).tan();
        let admittance = |e: Element| -> Complex64 {
            match e {
                Element::Resistor { r } => Complex64::new(1.0 / r, 0.0),
                Element::SeriesRl { r, l } => Complex64::new(r, warp * l).inv(),
                Element::Capacitor { c } => Complex64::new(0.0, warp * c),
            }
        };
        let phasor = |t: Terminal| -> Option<Complex64> {
            match t {
                Terminal::Ground => Some(Complex64::new(0.0, 0.0)),
                Terminal::Node(_) => None,
                Terminal::Source(s) => match self.sources[s] {
                    SourceWaveform::Cosine { amplitude, phase, .. } => Some(Complex64::from_polar(amplitude, phase)),
                    SourceWaveform::Dc { .. } => Some(Complex64::new(0.0, 0.0)),
                },
            }
        };

        let mut y = vec![Complex64::new(0.0, 0.0); n * n];
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for b in self.branches.iter().filter(|b| b.closed) {
            let yb = admittance(b.element);
            stamp(&mut y, n, b.from, b.to, yb);
            if let Terminal::Node(a) = b.from {
                if let Some(v) = phasor(b.to) {
                    rhs[a] += yb * v;
                }
            }
            if let Terminal::Node(c) = b.to {
                if let Some(v) = phasor(b.from) {
                    rhs[c] += yb * v;
                }
            }
        }
        for (k, floating) in self.floating_nodes().into_iter().enumerate() {
            if floating {
                y[k * n + k] = Complex64::new(1.0, 0.0);
            }
        }
        let v = solve_complex(y, rhs, n).ok_or_else(|| Error::Config("singular phasor network matrix".into()))?;

        let mut state = State::zero(n, self.branches.len());
        for (k, b) in self.branches.iter().enumerate() {
            if !b.closed {
                continue;
            }
            let at = |t: Terminal| phasor(t).unwrap_or_else(|| match t {
                Terminal::Node(i) => v[i],
                _ => unreachable!(),
            });
            let vb = at(b.from) - at(b.to);
            state.branch_voltages[k] = vb.re;
            state.branch_currents[k] = (admittance(b.element) * vb).re;
        }
        state.node_voltages = v.iter().map(|c| c.re).collect();
        Ok(state)
    }
}

fn stamp<T>(m: &mut [T], n: usize, from: Terminal, to: Terminal, y: T)
where
    T: Copy + std::ops::AddAssign + std::ops::SubAssign,
{
    match (from, to) {
        (Terminal::Node(a), Terminal::Node(b)) => {
            m[a * n + a] += y;
            m[b * n + b] += y;
            m[a * n + b] -= y;
            m[b * n + a] -= y;
        }
        (Terminal::Node(a), _) | (_, Terminal::Node(a)) => m[a * n + a] += y,
        _ => {}
    }
}

/// Dense LU factorization with partial pivoting.
#[derive(Debug, Clone)]
struct LuFactor {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactor {
    fn new(mut a: Vec<f64>, n: usize) -> Result<Self> {
        let scale = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap_or(k);
            if a[p * n + k].abs() <= 1e-14 * scale {
                return Err(Error::Topology(format!("singular nodal matrix at pivot {k}")));
            }
            if p != k {
                for c in 0..n {
                    a.swap(k * n + c, p * n + c);
                }
                perm.swap(k, p);
            }
            let pivot = a[k * n + k];
            for i in k + 1..n {
                let f = a[i * n + k] / pivot;
                a[i * n + k] = f;
                for c in k + 1..n {
                    a[i * n + c] -= f * a[k * n + c];
                }
            }
        }
        Ok(Self { n, lu: a, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for k in 0..i {
                x[i] -= self.lu[i * n + k] * x[k];
            }
        }
        for i in (0..n).rev() {
            for k in i + 1..n {
                x[i] -= self.lu[i * n + k] * x[k];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }
}

fn solve_complex(mut a: Vec<Complex64>, mut b: Vec<Complex64>, n: usize) -> Option<Vec<Complex64>> {
    let scale = a.iter().fold(0.0f64, |m, x| m.max(x.norm()));
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i * n + k].norm().total_cmp(&a[j * n + k].norm()))?;
        if a[p * n + k].norm() <= 1e-14 * scale {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let pivot = a[k * n + k];
        for i in k + 1..n {
            let f = a[i * n + k] / pivot;
            for c in k..n {
                let akc = a[k * n + c];
                a[i * n + c] -= f * akc;
            }
            let bk = b[k];
            b[i] -= f * bk;
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for c in i + 1..n {
            s -= a[i * n + c] * b[c];
        }
        b[i] = s / a[i * n + i];
    }
    Some(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DT: f64 = 1.0 / 4000.0;

    fn rl_circuit(volts: f64, r: f64, l: f64) -> (Network, usize) {
        let mut net = Network::new(1, DT);
        let src = net.add_source(SourceWaveform::Dc { volts });
        net.add_branch(src, Terminal::Node(0), Element::Resistor { r }, true);
        let b = net.add_branch(Terminal::Node(0), Terminal::Ground, Element::SeriesRl { r: 0.0, l }, true);
        (net, b)
    }

    #[test]
    fn zero_sources_stay_at_rest() {
        let (mut net, _) = rl_circuit(0.0, 2.0, 0.01);
        let mut s = State::zero(1, 2);
        for _ in 0..500 {
            net.step(&mut s).unwrap();
        }
        assert!(s.branch_currents.iter().chain(&s.node_voltages).all(|&x| x == 0.0));
    }

    #[test]
    fn dc_rl_step_matches_exponential() {
        let (volts, r, l) = (10.0, 2.0, 0.05);
        let (mut net, b) = rl_circuit(volts, r, l);
        let mut s = State::zero(1, 2);
        let tau = l / r;
        for n in 1..=100 {
            net.step(&mut s).unwrap();
            let t = n as f64 * DT;
            let exact = volts / r * (1.0 - (-t / tau).exp());
            if n == 100 {
                let rel = (s.branch_currents[b] - exact).abs() / exact;
                assert!(rel < 0.01, "relative error {rel}");
            }
        }
    }

    #[test]
    fn rc_discharge_decays() {
        let mut net = Network::new(1, DT);
        let c = net.add_branch(Terminal::Node(0), Terminal::Ground, Element::Capacitor { c: 1e-3 }, true);
        net.add_branch(Terminal::Node(0), Terminal::Ground, Element::Resistor { r: 10.0 }, true);
        let mut s = State::zero(1, 2);
        s.node_voltages[0] = 1.0;
        s.branch_voltages[c] = 1.0;
        s.branch_voltages[1] = 1.0;
        s.branch_currents[1] = 0.1;
        s.branch_currents[c] = -0.1;
        for _ in 0..40 {
            net.step(&mut s).unwrap();
        }
        // 40 steps = 10 ms = one time constant.
        let exact = (-1.0f64).exp();
        assert!((s.node_voltages[0] - exact).abs() < 1e-4);
    }

    #[test]
    fn isolated_capacitor_is_pinned_not_singular() {
        let mut net = Network::new(2, DT);
        let src = net.add_source(SourceWaveform::Dc { volts: 1.0 });
        net.add_branch(src, Terminal::Node(0), Element::Resistor { r: 1.0 }, true);
        net.add_branch(Terminal::Node(0), Terminal::Ground, Element::Resistor { r: 1.0 }, true);
        let sw = net.add_branch(Terminal::Node(0), Terminal::Node(1), Element::Resistor { r: 1.0 }, false);
        let mut s = State::zero(2, 3);
        net.step(&mut s).unwrap();
        assert!((s.node_voltages[0] - 0.5).abs() < 1e-12);
        assert_eq!(s.node_voltages[1], 0.0);
        assert_eq!(s.branch_currents[sw], 0.0);
    }

    #[test]
    fn floating_subnetwork_without_ground_is_singular() {
        let mut net = Network::new(2, DT);
        net.add_branch(Terminal::Node(0), Terminal::Node(1), Element::Resistor { r: 1.0 }, true);
        let mut s = State::zero(2, 1);
        assert!(matches!(net.step(&mut s), Err(Error::Topology(_))));
    }

    #[test]
    fn non_physical_element_rejected() {
        let mut net = Network::new(1, DT);
        net.add_branch(Terminal::Node(0), Terminal::Ground, Element::Resistor { r: -1.0 }, true);
        assert!(matches!(net.steady_state(100.0), Err(Error::Config(_))));
    }

    #[test]
    fn steady_state_is_transient_free() {
        let omega = 2.0 * std::f64::consts::PI * 50.0;
        let mut net = Network::new(2, DT);
        let src = net.add_source(SourceWaveform::Cosine {
            amplitude: 100.0,
            omega,
            phase: 0.3,
        });
        net.add_branch(src, Terminal::Node(0), Element::SeriesRl { r: 1.0, l: 0.02 }, true);
        net.add_branch(Terminal::Node(0), Terminal::Node(1), Element::SeriesRl { r: 5.0, l: 0.1 }, true);
        net.add_branch(Terminal::Node(1), Terminal::Ground, Element::Capacitor { c: 20e-6 }, true);
        net.add_branch(Terminal::Node(1), Terminal::Ground, Element::Resistor { r: 50.0 }, true);
        let mut s = net.steady_state(omega).unwrap();
        let first = s.branch_currents[0];
        // After exactly one period (80 steps) the state must repeat.
        for _ in 0..80 {
            net.step(&mut s).unwrap();
        }
        assert!((s.branch_currents[0] - first).abs() < 1e-9 * first.abs().max(1.0));
    }
}
