use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use super::DomainError;

pub type Cell = (usize, usize);

/// A rectangular map for the grid domains, 1-based with row 1 on top.
///
/// ASCII form, one row per line: `.` floor, `W` wall, `D` door, `k` key,
/// `s` start, and any other uppercase letter a gem (or target cell).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridMap {
    pub width: usize,
    pub height: usize,
    pub walls: BTreeSet<Cell>,
    pub doors: BTreeSet<Cell>,
    pub keys: Vec<Cell>,
    /// Gems keyed by their map letter.
    pub gems: BTreeMap<char, Cell>,
    pub start: Cell,
}

pub fn gem_name(letter: char) -> String {
    let colour = match letter {
        'R' => "red",
        'Y' => "yellow",
        'B' => "blue",
        'G' => "green",
        'P' => "purple",
        _ => return format!("gem-{}", letter.to_ascii_lowercase()),
    };
    format!("gem-{colour}")
}

impl GridMap {
    pub fn parse(ascii: &str) -> Result<GridMap, DomainError> {
        let rows: Vec<Vec<char>> = ascii
            .lines()
            .map(|l| l.split_whitespace().collect::<String>().chars().collect::<Vec<_>>())
            .filter(|r| !r.is_empty())
            .collect();
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if width == 0 || rows.iter().any(|r| r.len() != width) {
            return Err(DomainError::BadMap("rows must be non-empty and of equal width".into()));
        }
        let mut map = GridMap {
            width,
            height,
            walls: BTreeSet::new(),
            doors: BTreeSet::new(),
            keys: Vec::new(),
            gems: BTreeMap::new(),
            start: (0, 0),
        };
        let mut start = None;
        for (y, row) in rows.iter().enumerate() {
            for (x, &ch) in row.iter().enumerate() {
                let cell = (x + 1, y + 1);
                match ch {
                    '.' => {}
                    'W' => {
                        map.walls.insert(cell);
                    }
                    'D' => {
                        map.doors.insert(cell);
                    }
                    'k' => map.keys.push(cell),
                    's' if start.is_none() => start = Some(cell),
                    c if c.is_ascii_uppercase() => {
                        if map.gems.insert(c, cell).is_some() {
                            return Err(DomainError::BadMap(format!("gem `{c}` appears twice")));
                        }
                    }
                    c => return Err(DomainError::BadMap(format!("unexpected map character `{c}`"))),
                }
            }
        }
        map.start = start.ok_or_else(|| DomainError::BadMap("no start cell `s`".into()))?;
        Ok(map)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::new();
        for y in 1..=self.height {
            for x in 1..=self.width {
                let c = (x, y);
                let ch = if self.walls.contains(&c) {
                    'W'
                } else if self.doors.contains(&c) {
                    'D'
                } else if self.keys.contains(&c) {
                    'k'
                } else if let Some((&g, _)) = self.gems.iter().find(|(_, &p)| p == c) {
                    g
                } else if c == self.start {
                    's'
                } else {
                    '.'
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }

    fn coords(&self) -> usize {
        self.width.max(self.height)
    }

    fn header(&self, out: &mut String, name: &str, domain: &str, extra_objects: &str) {
        let _ = writeln!(out, "(define (problem {name}) (:domain {domain})");
        let coords: Vec<String> = (1..=self.coords()).map(|i| format!("c{i}")).collect();
        let _ = writeln!(out, "  (:objects {} - coord{extra_objects})", coords.join(" "));
        out.push_str("  (:init\n   ");
        for i in 1..=self.coords() {
            let _ = write!(out, " (= (val c{i}) {i})");
        }
        let _ = writeln!(out, "\n    (= (xpos) {}) (= (ypos) {})", self.start.0, self.start.1);
        // Cells beyond the map edge are walls, so moves never leave the map.
        let mut walls = self.walls.clone();
        for x in 1..=self.coords() {
            for y in 1..=self.coords() {
                if x > self.width || y > self.height {
                    walls.insert((x, y));
                }
            }
        }
        for (x, y) in walls {
            let _ = writeln!(out, "    (wall c{x} c{y})");
        }
    }

    /// Problem text for the doors-keys-gems domain, one goal per gem.
    pub fn dkg_problem(&self, name: &str) -> String {
        let mut objects = String::new();
        if !self.keys.is_empty() {
            let keys: Vec<String> = (1..=self.keys.len()).map(|i| format!("key{i}")).collect();
            let _ = write!(objects, " {} - key", keys.join(" "));
        }
        if !self.gems.is_empty() {
            let gems: Vec<String> = self.gems.keys().map(|&g| gem_name(g)).collect();
            let _ = write!(objects, " {} - gem", gems.join(" "));
        }
        let mut out = String::new();
        self.header(&mut out, name, "doors-keys-gems", &objects);
        for &(x, y) in &self.doors {
            let _ = writeln!(out, "    (door c{x} c{y})");
        }
        for (i, &(x, y)) in self.keys.iter().enumerate() {
            let _ = writeln!(out, "    (at key{} c{x} c{y})", i + 1);
        }
        for (&g, &(x, y)) in &self.gems {
            let _ = writeln!(out, "    (at {} c{x} c{y})", gem_name(g));
        }
        out.push_str("  )\n  (:goals\n");
        for &g in self.gems.keys() {
            let n = gem_name(g);
            let _ = writeln!(out, "    ({n} (has {n}))");
        }
        out.push_str("  ))\n");
        out
    }

    /// Problem text for the plain gridworld domain: each gem letter marks a
    /// target cell and becomes a goal labelled by the lowercase letter.
    pub fn gridworld_problem(&self, name: &str) -> String {
        let mut out = String::new();
        self.header(&mut out, name, "gridworld", "");
        out.push_str("  )\n  (:goals\n");
        for (&g, &(x, y)) in &self.gems {
            let _ = writeln!(out, "    ({} (and (= (xpos) {x}) (= (ypos) {y})))", g.to_ascii_lowercase());
        }
        out.push_str("  ))\n");
        out
    }

    pub fn is_free(&self, c: Cell) -> bool {
        c.0 >= 1 && c.1 >= 1 && c.0 <= self.width && c.1 <= self.height && !self.walls.contains(&c)
    }

    pub fn neighbours(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        let (x, y) = c;
        [(x, y.wrapping_sub(1)), (x, y + 1), (x.wrapping_sub(1), y), (x + 1, y)]
            .into_iter()
            .filter(move |&n| self.is_free(n))
    }

    /// Breadth-first distances from `from`, treating doors as passable when
    /// `through_doors` is set. `None` for unreachable cells.
    pub fn bfs(&self, from: Cell, through_doors: bool) -> BTreeMap<Cell, usize> {
        let mut dist = BTreeMap::from([(from, 0)]);
        let mut queue = VecDeque::from([from]);
        while let Some(c) = queue.pop_front() {
            let d = dist[&c];
            for n in self.neighbours(c) {
                if (!through_doors && self.doors.contains(&n)) || dist.contains_key(&n) {
                    continue;
                }
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
        dist
    }

    fn empty_cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for y in 1..=self.height {
            for x in 1..=self.width {
                let c = (x, y);
                if self.is_free(c)
                    && !self.doors.contains(&c)
                    && !self.keys.contains(&c)
                    && c != self.start
                    && !self.gems.values().any(|&g| g == c)
                {
                    out.push(c);
                }
            }
        }
        out
    }
}

/// Random wall layout with `targets` goal cells; every target reachable.
pub fn generate_gridworld<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    wall_prob: f64,
    targets: usize,
    rng: &mut R,
) -> Result<GridMap, DomainError> {
    if width * height < targets + 1 || width == 0 || height == 0 {
        return Err(DomainError::Generation(format!("{width}x{height} grid has no room for {targets} targets")));
    }
    for _ in 0..MAX_ATTEMPTS {
        let mut map = blank(width, height);
        for y in 1..=height {
            for x in 1..=width {
                if rng.random_bool(wall_prob) {
                    map.walls.insert((x, y));
                }
            }
        }
        let mut free: Vec<Cell> =
            (1..=height).flat_map(|y| (1..=width).map(move |x| (x, y))).filter(|c| !map.walls.contains(c)).collect();
        if free.len() < targets + 1 {
            continue;
        }
        free.shuffle(rng);
        map.start = free[0];
        for (i, &c) in free[1..=targets].iter().enumerate() {
            map.gems.insert((b'A' + i as u8) as char, c);
        }
        let reach = map.bfs(map.start, true);
        if map.gems.values().all(|c| reach.contains_key(c)) {
            return Ok(map);
        }
    }
    Err(DomainError::Generation("no connected layout found".into()))
}

/// Random doors-keys-gems layout. Each door is placed next to a gem;
/// solvability of every gem is checked by the caller with a planner.
pub fn generate_dkg_layout<R: Rng + ?Sized>(
    width: usize,
    height: usize,
    keys: usize,
    doors: usize,
    gems: usize,
    rng: &mut R,
) -> Result<GridMap, DomainError> {
    if width * height < 1 + keys + doors + gems || gems == 0 || gems > GEM_LETTERS.len() {
        return Err(DomainError::Generation(format!(
            "{width}x{height} grid has no room for {gems} gems, {keys} keys and {doors} doors"
        )));
    }
    let mut map = blank(width, height);
    for y in 1..=height {
        for x in 1..=width {
            if rng.random_bool(0.2) {
                map.walls.insert((x, y));
            }
        }
    }
    let mut free = map.empty_cells();
    free.push(map.start);
    if free.len() < 1 + keys + doors + gems {
        return Err(DomainError::Generation("too many walls".into()));
    }
    free.shuffle(rng);
    map.start = free.pop().unwrap();
    for &letter in &GEM_LETTERS[..gems] {
        map.gems.insert(letter, free.pop().unwrap());
    }
    let gem_cells: Vec<Cell> = map.gems.values().copied().collect();
    for _ in 0..doors {
        let g = gem_cells[rng.random_range(0..gem_cells.len())];
        let options: Vec<Cell> =
            map.neighbours(g).filter(|c| *c != map.start && !map.doors.contains(c) && !gem_cells.contains(c)).collect();
        let Some(&d) = options.get(rng.random_range(0..options.len().max(1))) else {
            return Err(DomainError::Generation("gem has no free neighbour for a door".into()));
        };
        map.doors.insert(d);
    }
    let mut free = map.empty_cells();
    free.shuffle(rng);
    if free.len() < keys {
        return Err(DomainError::Generation("no room for keys".into()));
    }
    map.keys = free[..keys].to_vec();
    map.keys.sort();
    Ok(map)
}

const GEM_LETTERS: [char; 5] = ['R', 'Y', 'B', 'G', 'P'];
pub(crate) const MAX_ATTEMPTS: usize = 200;

fn blank(width: usize, height: usize) -> GridMap {
    GridMap {
        width,
        height,
        walls: BTreeSet::new(),
        doors: BTreeSet::new(),
        keys: Vec::new(),
        gems: BTreeMap::new(),
        start: (1, 1),
    }
}
