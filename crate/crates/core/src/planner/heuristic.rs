use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pddl::{AtomId, CmpOp, Condition, FluentId, GoalSpec, NumExpr, ObjectId, ProblemDef, State, TypeId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeuristicError {
    #[error("grid heuristic needs the 0-ary fluent `{0}`")]
    MissingPositionFluent(String),
    #[error("grid heuristic needs a unary coordinate-value function `{0}`")]
    MissingCoordinateFunction(String),
    #[error("maze heuristic needs a `(wall ?x ?y)` predicate over coordinates")]
    MissingWalls,
    #[error("unknown heuristic `{0}` (expected manhattan, maze, goal_count or hadd)")]
    Unknown(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeuristicKind {
    Manhattan,
    Maze,
    GoalCount,
    #[serde(alias = "h_add")]
    HAdd,
}

impl fmt::Display for HeuristicKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HeuristicKind::Manhattan => "manhattan",
            HeuristicKind::Maze => "maze",
            HeuristicKind::GoalCount => "goal_count",
            HeuristicKind::HAdd => "hadd",
        })
    }
}

impl FromStr for HeuristicKind {
    type Err = HeuristicError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "manhattan" | "mh" => Ok(HeuristicKind::Manhattan),
            "maze" | "mz" => Ok(HeuristicKind::Maze),
            "goal_count" | "gc" => Ok(HeuristicKind::GoalCount),
            "hadd" | "h_add" => Ok(HeuristicKind::HAdd),
            _ => Err(HeuristicError::Unknown(s.to_string())),
        }
    }
}

/// Goal-distance estimate `h(s, g)`. Cheap to clone.
#[derive(Clone, Debug)]
pub enum Heuristic {
    /// Manhattan distance through the positions named by the goal.
    Manhattan(Arc<GridSpec>),
    /// Breadth-first grid distance ignoring doors.
    Maze(Arc<MazeTable>),
    /// Number of unsatisfied goal conjuncts.
    GoalCount,
    /// Additive delete-relaxation estimate.
    HAdd,
}

impl Heuristic {
    pub fn build(kind: HeuristicKind, problem: &ProblemDef) -> Result<Heuristic, HeuristicError> {
        Ok(match kind {
            HeuristicKind::Manhattan => Heuristic::Manhattan(Arc::new(GridSpec::detect(problem)?)),
            HeuristicKind::Maze => Heuristic::Maze(Arc::new(MazeTable::build(GridSpec::detect(problem)?, problem)?)),
            HeuristicKind::GoalCount => Heuristic::GoalCount,
            HeuristicKind::HAdd => Heuristic::HAdd,
        })
    }

    pub fn kind(&self) -> HeuristicKind {
        match self {
            Heuristic::Manhattan(_) => HeuristicKind::Manhattan,
            Heuristic::Maze(_) => HeuristicKind::Maze,
            Heuristic::GoalCount => HeuristicKind::GoalCount,
            Heuristic::HAdd => HeuristicKind::HAdd,
        }
    }

    /// Non-negative estimate; `f64::INFINITY` when the goal is provably
    /// unreachable.
    pub fn evaluate(&self, problem: &ProblemDef, s: &State, g: &GoalSpec) -> f64 {
        match self {
            Heuristic::Manhattan(grid) => {
                grid.goal_distance(problem, s, g, &|a, b| ((a.0 - b.0).abs() + (a.1 - b.1).abs()) as f64)
            }
            Heuristic::Maze(maze) => maze.grid.goal_distance(problem, s, g, &|a, b| maze.distance(a, b)),
            Heuristic::GoalCount => problem.unsatisfied_count(s, g) as f64,
            Heuristic::HAdd => h_add(problem, s, g),
        }
    }
}

type Cell = (i64, i64);

#[derive(Clone, Debug)]
enum Locator {
    /// `(pred ?o ?x ?y)`: object at a cell. Candidates precomputed per object.
    Direct { pred: usize, located: TypeId },
    /// `(pred ?o ?place)` with `place` located directly.
    Indirect { pred: usize, located: TypeId, place: TypeId },
    /// `(pred ?o)`: carried by the agent.
    Carried { pred: usize, located: TypeId },
}

/// Integer-fluent grid encoding: agent position in two 0-ary fluents and
/// coordinate objects mapped to integers by a unary function.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub x: FluentId,
    pub y: FluentId,
    pub coord_type: TypeId,
    coord_value: Vec<Option<i64>>,
    locators: Vec<Locator>,
    /// `direct[obj]` lists `(atom, cell)` placing `obj` at that cell.
    direct: Vec<Vec<(AtomId, Cell)>>,
}

impl GridSpec {
    /// Detect the grid encoding from fluents `xpos`, `ypos` and `val`.
    pub fn detect(problem: &ProblemDef) -> Result<GridSpec, HeuristicError> {
        GridSpec::new(problem, "xpos", "ypos", "val")
    }

    pub fn new(problem: &ProblemDef, x: &str, y: &str, value_fn: &str) -> Result<GridSpec, HeuristicError> {
        let dom = &problem.domain;
        let zero_ary = |name: &str| {
            dom.function_id(name)
                .filter(|&f| dom.functions[f].params.is_empty())
                .and_then(|f| problem.fluent_id(f, []))
                .ok_or_else(|| HeuristicError::MissingPositionFluent(name.to_string()))
        };
        let (xf, yf) = (zero_ary(x)?, zero_ary(y)?);
        let vf = dom
            .function_id(value_fn)
            .filter(|&f| dom.functions[f].params.len() == 1)
            .ok_or_else(|| HeuristicError::MissingCoordinateFunction(value_fn.to_string()))?;
        let coord_type = dom.functions[vf].params[0].ty;
        let mut coord_value = vec![None; problem.objects.len()];
        for &c in problem.objects_of_type(coord_type) {
            let fid = problem.fluent_id(vf, [c]).expect("coordinate fluent is in vocabulary");
            coord_value[c as usize] = Some(problem.init.fluent(fid));
        }

        let is_coord = |ty: TypeId| dom.is_subtype(ty, coord_type);
        let mut locators = Vec::new();
        let mut direct_types = Vec::new();
        for (pid, p) in dom.predicates.iter().enumerate() {
            let tys: Vec<TypeId> = p.params.iter().map(|q| q.ty).collect();
            if let [o, cx, cy] = tys[..] {
                if !is_coord(o) && is_coord(cx) && is_coord(cy) {
                    locators.push(Locator::Direct { pred: pid, located: o });
                    direct_types.push(o);
                }
            }
        }
        for (pid, p) in dom.predicates.iter().enumerate() {
            let tys: Vec<TypeId> = p.params.iter().map(|q| q.ty).collect();
            match tys[..] {
                [o, place] if !is_coord(o) && direct_types.iter().any(|&d| dom.is_subtype(place, d)) => {
                    locators.push(Locator::Indirect { pred: pid, located: o, place })
                }
                [o] if !is_coord(o) => locators.push(Locator::Carried { pred: pid, located: o }),
                _ => {}
            }
        }

        let mut direct = vec![Vec::new(); problem.objects.len()];
        let coords = problem.objects_of_type(coord_type);
        for loc in &locators {
            if let Locator::Direct { pred, located } = *loc {
                for &o in problem.objects_of_type(located) {
                    for &cx in coords {
                        for &cy in coords {
                            if let Some(atom) = problem.atom_id(pred, [o, cx, cy]) {
                                let cell = (coord_value[cx as usize].unwrap(), coord_value[cy as usize].unwrap());
                                direct[o as usize].push((atom, cell));
                            }
                        }
                    }
                }
            }
        }
        Ok(GridSpec { x: xf, y: yf, coord_type, coord_value, locators, direct })
    }

    pub fn agent(&self, s: &State) -> Cell {
        (s.fluent(self.x), s.fluent(self.y))
    }

    pub fn coord_value(&self, obj: ObjectId) -> Option<i64> {
        self.coord_value.get(obj as usize).copied().flatten()
    }

    /// Current cell of an object: placed directly, placed at a located
    /// place, or carried by the agent.
    pub fn locate(&self, problem: &ProblemDef, s: &State, obj: ObjectId) -> Option<Cell> {
        if let Some(&(_, cell)) = self.direct[obj as usize].iter().find(|(a, _)| s.holds(*a)) {
            return Some(cell);
        }
        let ty = problem.objects[obj as usize].1;
        for loc in &self.locators {
            match *loc {
                Locator::Indirect { pred, located, place } if problem.domain.is_subtype(ty, located) => {
                    for &p in problem.objects_of_type(place) {
                        if problem.atom_id(pred, [obj, p]).is_some_and(|a| s.holds(a)) {
                            if let Some(c) = self.direct[p as usize].iter().find(|(a, _)| s.holds(*a)) {
                                return Some(c.1);
                            }
                        }
                    }
                }
                Locator::Carried { pred, located }
                    if problem.domain.is_subtype(ty, located)
                        && problem.atom_id(pred, [obj]).is_some_and(|a| s.holds(a)) =>
                {
                    return Some(self.agent(s));
                }
                _ => {}
            }
        }
        None
    }

    /// Max over unsatisfied goal conjuncts of the path length from the
    /// agent through the conjunct's object positions, combined with the
    /// per-axis distance to any positional target.
    fn goal_distance(&self, problem: &ProblemDef, s: &State, g: &GoalSpec, dist: &dyn Fn(Cell, Cell) -> f64) -> f64 {
        let agent = self.agent(s);
        let mut target: (Option<i64>, Option<i64>) = (None, None);
        let mut best: f64 = 0.0;
        for c in &g.conditions {
            if let Condition::Compare { op: CmpOp::Eq, lhs, rhs } = c {
                let axis = |e: &NumExpr, other: &NumExpr| -> Option<(FluentId, i64)> {
                    match (e, other) {
                        (NumExpr::Fluent { func, args }, NumExpr::Const(v)) if args.is_empty() => {
                            Some((problem.fluent_id(*func, [])?, *v))
                        }
                        _ => None,
                    }
                };
                if let Some((f, v)) = axis(lhs, rhs).or_else(|| axis(rhs, lhs)) {
                    if f == self.x {
                        target.0 = Some(v);
                        continue;
                    } else if f == self.y {
                        target.1 = Some(v);
                        continue;
                    }
                }
            }
            if problem.holds(c, s, &[]) {
                continue;
            }
            if let Condition::Atom { args, positive: true, .. } = c {
                let mut here = agent;
                let mut len = 0.0;
                for t in args {
                    let crate::pddl::Term::Obj(o) = *t else { continue };
                    if let Some(cell) = self.locate(problem, s, o) {
                        len += dist(here, cell);
                        here = cell;
                    }
                }
                best = best.max(len);
            }
        }
        if target.0.is_some() || target.1.is_some() {
            let goal_cell = (target.0.unwrap_or(agent.0), target.1.unwrap_or(agent.1));
            best = best.max(dist(agent, goal_cell));
        }
        best
    }
}

/// All-pairs breadth-first distances over the grid's non-wall cells,
/// ignoring doors.
#[derive(Clone, Debug)]
pub struct MazeTable {
    pub grid: GridSpec,
    origin: Cell,
    width: usize,
    height: usize,
    dist: Vec<u32>,
}

const UNREACHABLE: u32 = u32::MAX;

impl MazeTable {
    pub fn build(grid: GridSpec, problem: &ProblemDef) -> Result<MazeTable, HeuristicError> {
        let dom = &problem.domain;
        let wall = dom
            .predicate_id("wall")
            .filter(|&p| {
                let ps = &dom.predicates[p].params;
                ps.len() == 2 && ps.iter().all(|q| dom.is_subtype(q.ty, grid.coord_type))
            })
            .ok_or(HeuristicError::MissingWalls)?;
        let coords = problem.objects_of_type(grid.coord_type);
        let values: Vec<i64> = coords.iter().filter_map(|&c| grid.coord_value(c)).collect();
        let (lo, hi) = match (values.iter().min(), values.iter().max()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(HeuristicError::MissingWalls),
        };
        let side = (hi - lo + 1) as usize;
        let (width, height) = (side, side);
        let n = width * height;
        let mut open = vec![false; n];
        for &cx in coords {
            for &cy in coords {
                let (x, y) = (grid.coord_value(cx).unwrap(), grid.coord_value(cy).unwrap());
                let blocked = problem.atom_id(wall, [cx, cy]).is_some_and(|a| problem.init.holds(a));
                open[(x - lo) as usize + (y - lo) as usize * width] = !blocked;
            }
        }
        let mut dist = vec![UNREACHABLE; n * n];
        for src in 0..n {
            if !open[src] {
                continue;
            }
            let row = &mut dist[src * n..(src + 1) * n];
            row[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(c) = queue.pop_front() {
                let (cx, cy) = (c % width, c / width);
                let mut visit = |nx: usize, ny: usize| {
                    let nc = nx + ny * width;
                    if open[nc] && row[nc] == UNREACHABLE {
                        row[nc] = row[c] + 1;
                        queue.push_back(nc);
                    }
                };
                if cx > 0 {
                    visit(cx - 1, cy);
                }
                if cx + 1 < width {
                    visit(cx + 1, cy);
                }
                if cy > 0 {
                    visit(cx, cy - 1);
                }
                if cy + 1 < height {
                    visit(cx, cy + 1);
                }
            }
        }
        Ok(MazeTable { grid, origin: (lo, lo), width, height, dist })
    }

    fn index(&self, c: Cell) -> Option<usize> {
        let (x, y) = (c.0 - self.origin.0, c.1 - self.origin.1);
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| x as usize + y as usize * self.width)
    }

    pub fn distance(&self, a: Cell, b: Cell) -> f64 {
        match (self.index(a), self.index(b)) {
            (Some(i), Some(j)) => match self.dist[i * self.width * self.height + j] {
                UNREACHABLE => f64::INFINITY,
                d => d as f64,
            },
            _ => f64::INFINITY,
        }
    }
}

/// Additive heuristic: atom cost is the cheapest achiever's `1 + Σ pre`
/// cost, computed to a fixed point from `s`; the goal costs the sum over its
/// positive atoms.
pub fn h_add(problem: &ProblemDef, s: &State, g: &GoalSpec) -> f64 {
    let goal_atoms = problem.goal_atoms(g);
    if goal_atoms.iter().all(|&a| s.holds(a)) {
        return 0.0;
    }
    let costs = relaxed_costs(problem, s);
    goal_atoms.iter().map(|&a| costs[a]).sum()
}

/// Per-atom additive relaxed costs from `s`.
pub fn relaxed_costs(problem: &ProblemDef, s: &State) -> Vec<f64> {
    let table = problem.relaxed_table();
    let mut cost = vec![f64::INFINITY; problem.num_atoms()];
    for a in s.true_atoms() {
        cost[a] = 0.0;
    }
    loop {
        let mut changed = false;
        for act in &table.actions {
            let mut c = 1.0;
            for &p in &act.pre {
                c += cost[p];
            }
            if !c.is_finite() {
                continue;
            }
            for &e in &act.add {
                if c < cost[e] {
                    cost[e] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            return cost;
        }
    }
}
