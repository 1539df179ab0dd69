//! Anytime asymptotically optimal tree planner whose steering, distances and
//! costs come from a [`Manifold`].
//!
//! Each iteration samples a configuration (the goal with probability
//! `goal_bias`), expands the nearest vertex toward it, truncates the
//! expansion at the first collision, picks the cheapest parent within the
//! near radius and rewires neighbours through the new vertex. Vertices within
//! `goal_tolerance` of the goal are joined to it by a direct segment.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::expansion::{expand, expand_straight, ExpansionParams, Termination};
use crate::geodesy::distance::distance_raw;
use crate::geodesy::{path_energy, reparameterize_unit_speed, PathPolyline};
use crate::manifold::{Configuration, Manifold, Retraction};
use crate::metrics::ConstantMetric;

/// Relative margin on threshold and improvement tests.
const SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerMode {
    /// Natural-gradient expansion and midpoint distances of the manifold.
    Riemannian,
    /// Straight chart steps and chart-Euclidean distances on the same chart.
    EuclideanBaseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    pub mode: PlannerMode,
    pub max_iterations: usize,
    /// Wall-clock limit in seconds, checked before each iteration.
    pub time_limit: Option<f64>,
    pub goal_bias: f64,
    /// Defaults to the expansion step `s`.
    pub goal_tolerance: Option<f64>,
    /// Near radius `clamp(γ (ln n / n)^(1/d), s, range)`.
    pub gamma: f64,
    /// Upper bound on the distance covered by one expansion and on the
    /// near radius; unbounded when unset.
    pub range: Option<f64>,
    pub expansion: ExpansionParams,
    /// Chart-space spacing of collision samples along each segment.
    pub collision_step: f64,
    pub max_sample_attempts: usize,
    /// Waypoints of the returned unit-speed path; sized from the tree path
    /// when unset.
    pub output_points: Option<usize>,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        Self {
            mode: PlannerMode::Riemannian,
            max_iterations: 2000,
            time_limit: None,
            goal_bias: 0.05,
            goal_tolerance: None,
            gamma: 2.0,
            range: None,
            expansion: ExpansionParams::default(),
            collision_step: 0.02,
            max_sample_attempts: 10_000,
            output_points: None,
        }
    }
}

impl PlannerSettings {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.goal_bias)
            && self.expansion.s > 0.0
            && self.goal_tolerance.map_or(true, |t| t > 0.0)
            && self.gamma > 0.0
            && self.range.map_or(true, |r| r >= self.expansion.s)
            && self.collision_step > 0.0
            && self.max_sample_attempts > 0
            && self.time_limit.map_or(true, |t| t >= 0.0)
            && self.output_points.map_or(true, |n| n >= 2);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid planner settings {self:?}")))
        }
    }

    fn goal_tol(&self) -> f64 {
        self.goal_tolerance.unwrap_or(self.expansion.s)
    }

    fn range(&self) -> f64 {
        self.range.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone)]
pub struct PlanRequest {
    pub manifold: Manifold,
    pub env: Arc<dyn Environment>,
    pub start: Configuration,
    pub goal: Configuration,
    pub settings: PlannerSettings,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub q: Configuration,
    pub parent: Option<usize>,
    pub cost: f64,
    /// Edge from the parent, `None` at the root.
    pub edge: Option<PathPolyline>,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Root path to node `i` as one polyline; `None` at the root.
    pub fn path_to(&self, i: usize) -> Option<PathPolyline> {
        let mut chain = Vec::new();
        let mut k = i;
        while let Some(p) = self.nodes[k].parent {
            chain.push(k);
            k = p;
        }
        let mut it = chain.into_iter().rev();
        let mut path = self.nodes[it.next()?].edge.clone().expect("non-root edge");
        for k in it {
            path.concat(self.nodes[k].edge.as_ref().expect("non-root edge")).expect("edges chain");
        }
        Some(path)
    }

    /// Checks parent/child links, edge endpoints, acyclicity and
    /// `cost = parent cost + edge length` to relative tolerance `tol`.
    pub fn check_consistency(&self, tol: f64) -> std::result::Result<(), String> {
        let n = self.nodes.len();
        let root = self.nodes.first().ok_or("empty tree")?;
        if root.parent.is_some() || root.cost != 0.0 || root.edge.is_some() {
            return Err("malformed root".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                if c >= n || self.nodes[c].parent != Some(i) {
                    return Err(format!("child {c} of {i} does not point back"));
                }
            }
            if i == 0 {
                continue;
            }
            let p = node.parent.ok_or(format!("node {i} has no parent"))?;
            if p >= n || !self.nodes[p].children.contains(&i) {
                return Err(format!("node {i} missing from children of {p}"));
            }
            let e = node.edge.as_ref().ok_or(format!("node {i} has no edge"))?;
            if e.first() != &self.nodes[p].q || e.last() != &node.q {
                return Err(format!("edge of {i} does not join its endpoints"));
            }
            let want = self.nodes[p].cost + e.length();
            if (node.cost - want).abs() > tol * want.max(1.0) {
                return Err(format!("cost of {i} is {} but should be {want}", node.cost));
            }
            let mut k = i;
            for _ in 0..=n {
                match self.nodes[k].parent {
                    Some(q) => k = q,
                    None => break,
                }
            }
            if k != 0 {
                return Err(format!("node {i} is not connected to the root"));
            }
        }
        Ok(())
    }

    fn add(&mut self, parent: usize, edge: PathPolyline) -> usize {
        let id = self.nodes.len();
        let cost = self.nodes[parent].cost + edge.length();
        self.nodes[parent].children.push(id);
        self.nodes.push(Node {
            q: edge.last().clone(),
            parent: Some(parent),
            cost,
            edge: Some(edge),
            children: Vec::new(),
        });
        id
    }

    fn reparent(&mut self, i: usize, parent: usize, edge: PathPolyline) {
        let old = self.nodes[i].parent.expect("non-root");
        self.nodes[old].children.retain(|&c| c != i);
        self.nodes[parent].children.push(i);
        let cost = self.nodes[parent].cost + edge.length();
        let delta = cost - self.nodes[i].cost;
        self.nodes[i].parent = Some(parent);
        self.nodes[i].edge = Some(edge);
        self.nodes[i].cost = cost;
        let mut stack = self.nodes[i].children.clone();
        while let Some(k) = stack.pop() {
            self.nodes[k].cost += delta;
            stack.extend_from_slice(&self.nodes[k].children);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSample {
    pub iteration: usize,
    pub time: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanResult {
    pub success: bool,
    /// Unit-speed solution, evaluated under the request's manifold.
    pub path: Option<PathPolyline>,
    /// Tree cost of the returned goal vertex.
    pub cost: Option<f64>,
    pub length: Option<f64>,
    pub energy: Option<f64>,
    pub iterations: usize,
    pub nodes: usize,
    pub first_solution_iteration: Option<usize>,
    pub wall_time: f64,
    /// Best tree cost at each strict improvement, closed by the evaluated
    /// length of the returned path; empty on failure.
    pub cost_trace: Vec<CostSample>,
}

/// Uniform sample of the environment's box, rejected until collision free.
pub fn sample_free(
    m: &Manifold,
    env: &dyn Environment,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<Configuration> {
    let bounds = env.bounds();
    let mut c = vec![0.0; m.dim()];
    for _ in 0..max_attempts {
        for (x, [lo, hi]) in c.iter_mut().zip(&bounds) {
            *x = rng.gen_range(*lo..=*hi);
        }
        let q = m.configuration(&c)?;
        if !env.in_collision(&q) {
            return Ok(q);
        }
    }
    Err(Error::SamplingExhausted { attempts: max_attempts })
}

/// Index of the first segment with a colliding sample; segments are sampled
/// along their retraction curves at chart spacing at most `step`.
fn first_collision(m: &Manifold, env: &dyn Environment, w: &[Configuration], step: f64) -> Result<Option<usize>> {
    for (i, pair) in w.windows(2).enumerate() {
        let (a, b) = (pair[0].coords(), pair[1].coords());
        let chart = m.chart_difference_raw(a, b)?.norm();
        let k = ((chart / step).ceil() as usize).max(1);
        let v = m.inverse_retract_raw(a, b)?;
        for j in 1..=k {
            let hit = if j == k {
                env.in_collision(&pair[1])
            } else {
                env.in_collision(&Configuration::from_raw(m.retract_raw(a, &(&v * (j as f64 / k as f64)))))
            };
            if hit {
                return Ok(Some(i));
            }
        }
    }
    Ok(None)
}

/// Whether every waypoint and every sample along the segments of `path` at
/// chart spacing `step` is collision free.
pub fn check_edge(m: &Manifold, env: &dyn Environment, path: &PathPolyline, step: f64) -> Result<bool> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter("collision step must be positive".into()));
    }
    Ok(!env.in_collision(path.first()) && first_collision(m, env, path.waypoints(), step)?.is_none())
}

/// Vertex minimising `d̂(node, q)` and that distance; ties go to the lowest
/// id.
pub fn nearest(m: &Manifold, tree: &Tree, q: &Configuration) -> Result<(usize, f64)> {
    let mut best = (0, f64::INFINITY);
    for (i, node) in tree.nodes.iter().enumerate() {
        let d = distance_raw(m, node.q.coords(), q.coords())?;
        if d < best.1 * (1.0 - SLACK) {
            best = (i, d);
        }
    }
    Ok(best)
}

/// Same chart and wrapping with the identity metric and chart retraction.
fn chart_manifold(m: &Manifold) -> Result<Manifold> {
    let id = ConstantMetric::new(DMatrix::identity(m.dim(), m.dim()))?;
    Manifold::new(Arc::new(id), m.wrap_rules().to_vec(), Retraction::Chart)
}

#[derive(Debug)]
pub struct Planner {
    req: PlanRequest,
    work: Manifold,
    rng: ChaCha8Rng,
    tree: Tree,
    goal_nodes: Vec<usize>,
    iterations: usize,
    best: Option<f64>,
    first_solution: Option<usize>,
    trace: Vec<CostSample>,
    started: Instant,
}

impl Planner {
    pub fn new(req: PlanRequest) -> Result<Self> {
        req.settings.validate()?;
        req.manifold.check_dim(&req.start)?;
        req.manifold.check_dim(&req.goal)?;
        if req.env.bounds().len() != req.manifold.dim() {
            return Err(Error::DimensionMismatch { expected: req.manifold.dim(), got: req.env.bounds().len() });
        }
        if req.env.in_collision(&req.start) || req.env.in_collision(&req.goal) {
            return Err(Error::InvalidParameter("start and goal must be collision free".into()));
        }
        let work = match req.settings.mode {
            PlannerMode::Riemannian => req.manifold.clone(),
            PlannerMode::EuclideanBaseline => chart_manifold(&req.manifold)?,
        };
        let root = Node { q: req.start.clone(), parent: None, cost: 0.0, edge: None, children: Vec::new() };
        let mut p = Self {
            rng: ChaCha8Rng::seed_from_u64(req.seed),
            req,
            work,
            tree: Tree { nodes: vec![root] },
            goal_nodes: Vec::new(),
            iterations: 0,
            best: None,
            first_solution: None,
            trace: Vec::new(),
            started: Instant::now(),
        };
        p.try_goal(0)?;
        p.record();
        Ok(p)
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn best_cost(&self) -> Option<f64> {
        self.best
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Manifold whose distances define tree costs.
    pub fn working_manifold(&self) -> &Manifold {
        &self.work
    }

    fn dist(&self, a: &Configuration, b: &Configuration) -> Result<f64> {
        distance_raw(&self.work, a.coords(), b.coords())
    }

    /// Expansion from `from` toward `to` under the working manifold.
    fn steer(&self, from: &Configuration, to: &Configuration, d0: f64) -> Result<(Vec<Configuration>, Termination)> {
        let st = &self.req.settings;
        let budget = (3.0 * d0).min(st.range());
        let t = match st.mode {
            PlannerMode::Riemannian => {
                let params = ExpansionParams { d_max: Some(budget), ..st.expansion.clone() };
                expand(&self.work, from, to, &params)?
            }
            PlannerMode::EuclideanBaseline => expand_straight(&self.work, from, to, st.expansion.s, Some(budget))?,
        };
        Ok((t.waypoints, t.reason))
    }

    fn collision_free(&self, w: &[Configuration]) -> Result<bool> {
        Ok(first_collision(&self.work, self.req.env.as_ref(), w, self.req.settings.collision_step)?.is_none())
    }

    /// Collision-free edge that ends exactly at `to`, if the expansion
    /// arrives.
    fn connect(&self, from: &Configuration, to: &Configuration, d0: f64) -> Result<Option<PathPolyline>> {
        let (mut w, reason) = self.steer(from, to, d0)?;
        if reason != Termination::Reached {
            return Ok(None);
        }
        if w.last() != Some(to) {
            w.push(to.clone());
        }
        if !self.collision_free(&w)? {
            return Ok(None);
        }
        Ok(Some(PathPolyline::new(&self.work, w)?))
    }

    fn near_radius(&self) -> f64 {
        let n = self.tree.len() as f64;
        let d = self.work.dim() as f64;
        let st = &self.req.settings;
        let r = st.gamma * ((n.ln() / n).max(0.0)).powf(1.0 / d);
        r.max(st.expansion.s).min(st.range())
    }

    /// Joins vertex `i` to the goal by a direct segment when it is close.
    fn try_goal(&mut self, i: usize) -> Result<()> {
        let q = self.tree.nodes[i].q.clone();
        let goal = self.req.goal.clone();
        if q == goal {
            if !self.goal_nodes.contains(&i) {
                self.goal_nodes.push(i);
            }
            return Ok(());
        }
        if self.dist(&q, &goal)? > self.req.settings.goal_tol() * (1.0 + SLACK) {
            return Ok(());
        }
        let w = [q, goal];
        if self.collision_free(&w)? {
            let edge = PathPolyline::new(&self.work, w.to_vec())?;
            let id = self.tree.add(i, edge);
            self.goal_nodes.push(id);
        }
        Ok(())
    }

    fn record(&mut self) {
        let best = self
            .goal_nodes
            .iter()
            .map(|&g| self.tree.nodes[g].cost)
            .fold(None, |a: Option<f64>, c| Some(a.map_or(c, |a| a.min(c))));
        if let Some(c) = best {
            if self.best.map_or(true, |b| c < b) {
                self.best = Some(c);
                self.first_solution.get_or_insert(self.iterations);
                self.trace.push(CostSample {
                    iteration: self.iterations,
                    time: self.started.elapsed().as_secs_f64(),
                    cost: c,
                });
            }
        }
    }

    /// One sample-expand-rewire iteration.
    pub fn step(&mut self) -> Result<()> {
        self.iterations += 1;
        let st = self.req.settings.clone();
        let q_rand = if self.rng.gen::<f64>() < st.goal_bias {
            self.req.goal.clone()
        } else {
            sample_free(&self.req.manifold, self.req.env.as_ref(), &mut self.rng, st.max_sample_attempts)?
        };

        let (near_id, d0) = nearest(&self.work, &self.tree, &q_rand)?;
        if !(d0 > 1e-12) {
            return Ok(());
        }
        let from = self.tree.nodes[near_id].q.clone();
        let (mut w, _) = self.steer(&from, &q_rand, d0)?;
        if let Some(i) = first_collision(&self.work, self.req.env.as_ref(), &w, st.collision_step)? {
            w.truncate(i + 1);
        }
        if w.len() < 2 {
            return Ok(());
        }
        let q_new = w.last().expect("nonempty").clone();
        let first_edge = PathPolyline::new(&self.work, w)?;

        let r = self.near_radius();
        let mut near = Vec::new();
        for (i, node) in self.tree.nodes.iter().enumerate() {
            let d = self.dist(&node.q, &q_new)?;
            if d <= r * (1.0 + SLACK) {
                near.push((i, d));
            }
        }

        let mut parent = near_id;
        let mut best = self.tree.nodes[near_id].cost + first_edge.length();
        let mut edge = first_edge;
        let mut cands: Vec<(f64, usize, f64)> =
            near.iter().filter(|(i, _)| *i != near_id).map(|&(i, d)| (self.tree.nodes[i].cost + d, i, d)).collect();
        cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (lb, i, d) in cands {
            if lb >= best * (1.0 - SLACK) {
                break;
            }
            let x = self.tree.nodes[i].q.clone();
            if let Some(e) = self.connect(&x, &q_new, d)? {
                let c = self.tree.nodes[i].cost + e.length();
                if c < best * (1.0 - SLACK) {
                    best = c;
                    parent = i;
                    edge = e;
                }
            }
        }
        let new_id = self.tree.add(parent, edge);

        let c_new = self.tree.nodes[new_id].cost;
        for (i, d) in near {
            if i == parent || c_new + d >= self.tree.nodes[i].cost * (1.0 - SLACK) {
                continue;
            }
            let x = self.tree.nodes[i].q.clone();
            if let Some(e) = self.connect(&q_new, &x, d)? {
                if c_new + e.length() < self.tree.nodes[i].cost * (1.0 - SLACK) {
                    self.tree.reparent(i, new_id, e);
                }
            }
        }

        self.try_goal(new_id)?;
        self.record();
        Ok(())
    }

    fn out_of_time(&self) -> bool {
        self.req.settings.time_limit.map_or(false, |t| self.started.elapsed().as_secs_f64() >= t)
    }

    /// Runs until the iteration or time budget is spent.
    pub fn run(&mut self) -> Result<()> {
        while self.iterations < self.req.settings.max_iterations && !self.out_of_time() {
            self.step()?;
        }
        Ok(())
    }

    /// Unit-speed path to goal vertex `g` under the request's manifold, if it
    /// passes the collision recheck at half the collision step.
    fn extract(&self, g: usize) -> Result<Option<PathPolyline>> {
        let m = &self.req.manifold;
        let Some(tree_path) = self.tree.path_to(g) else {
            return Ok(None);
        };
        let raw = PathPolyline::new(m, tree_path.waypoints().to_vec())?;
        let step = 0.5 * self.req.settings.collision_step;
        let base = self.req.settings.output_points.unwrap_or_else(|| (2 * raw.num_segments() + 1).clamp(129, 2049));
        for n in [base, 4 * base] {
            let unit = match reparameterize_unit_speed(m, &raw, n) {
                Ok(u) => u,
                Err(Error::DegeneratePath) => return Ok(None),
                Err(e) => return Err(e),
            };
            if check_edge(m, self.req.env.as_ref(), &unit, step)? {
                return Ok(Some(unit));
            }
        }
        Ok(None)
    }

    pub fn finish(self) -> Result<PlanResult> {
        let mut goals = self.goal_nodes.clone();
        goals.sort_by(|&a, &b| self.tree.nodes[a].cost.total_cmp(&self.tree.nodes[b].cost).then(a.cmp(&b)));
        let mut chosen = None;
        for g in goals {
            if let Some(p) = self.extract(g)? {
                chosen = Some((g, p));
                break;
            }
        }
        let wall_time = self.started.elapsed().as_secs_f64();
        let mut result = PlanResult {
            success: false,
            path: None,
            cost: None,
            length: None,
            energy: None,
            iterations: self.iterations,
            nodes: self.tree.len(),
            first_solution_iteration: self.first_solution,
            wall_time,
            cost_trace: self.trace,
        };
        if let Some((g, p)) = chosen {
            let cost = self.tree.nodes[g].cost;
            result.success = true;
            result.cost = Some(cost);
            result.length = Some(p.length());
            result.energy = Some(path_energy(&p));
            result.path = Some(p);
            let length = result.length.expect("set above");
            result.cost_trace.retain(|s| s.cost >= length);
            result.cost_trace.push(CostSample { iteration: self.iterations, time: wall_time, cost: length });
        }
        Ok(result)
    }
}

/// Plans from start to goal within the request's budgets.
pub fn plan(req: PlanRequest) -> Result<PlanResult> {
    let mut p = Planner::new(req)?;
    p.run()?;
    p.finish()
}
