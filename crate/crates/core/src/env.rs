//! Factored gridworlds: FourRooms, ForageWorld and MudWorld.
//!
//! A state is an ordered tuple of variables. Variable 0 is always the agent
//! position; the remaining variables are small integers (flags and capped
//! counts) stored in [`FactoredState::vars`]. MudWorld additionally carries a
//! hidden per-cell mud map that is never part of the observation.

use std::fmt;
use std::str::FromStr;

use arrayvec::ArrayVec;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Probability that a movement action goes in one of the other three directions.
pub const SLIP_PROB: f64 = 0.1;

/// Non-position variables an environment may carry.
pub const MAX_AUX_VARS: usize = 5;

/// Cap on each ForageWorld resource count.
pub const RESOURCE_CAP: u8 = 4;

/// Cap on MudWorld's tracked-mud count.
pub const MUD_CAP: u8 = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("invalid action index {0}")]
    InvalidAction(usize),
    #[error("unknown environment '{0}'")]
    UnknownEnv(String),
    #[error("variable index {index} out of range for {nvars} variables")]
    InvalidVariable { index: usize, nvars: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    FourRooms,
    ForageWorld,
    MudWorld,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::FourRooms, EnvKind::ForageWorld, EnvKind::MudWorld];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::FourRooms => "fourrooms",
            EnvKind::ForageWorld => "forageworld",
            EnvKind::MudWorld => "mudworld",
        }
    }

    pub fn build(self) -> Env {
        match self {
            EnvKind::FourRooms => make_fourrooms(),
            EnvKind::ForageWorld => make_forageworld(),
            EnvKind::MudWorld => make_mudworld(),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = EnvError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fourrooms" => Ok(EnvKind::FourRooms),
            "forageworld" => Ok(EnvKind::ForageWorld),
            "mudworld" => Ok(EnvKind::MudWorld),
            _ => Err(EnvError::UnknownEnv(s.to_string())),
        }
    }
}

/// Movement directions, in action-index order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Up,
    Right,
    Left,
    Down,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Up, Direction::Right, Direction::Left, Direction::Down];

    pub fn delta(self) -> (i32, i32) {
        match self {
            Direction::Up => (-1, 0),
            Direction::Right => (0, 1),
            Direction::Left => (0, -1),
            Direction::Down => (1, 0),
        }
    }
}

/// Primitive actions. Indices follow the declaration order, so `Terminate` is 4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Up,
    Right,
    Left,
    Down,
    Terminate,
}

impl Action {
    pub const COUNT: usize = 5;
    pub const ALL: [Action; 5] = [Action::Up, Action::Right, Action::Left, Action::Down, Action::Terminate];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Result<Self, EnvError> {
        Self::ALL.get(index).copied().ok_or(EnvError::InvalidAction(index))
    }

    pub fn direction(self) -> Option<Direction> {
        match self {
            Action::Up => Some(Direction::Up),
            Action::Right => Some(Direction::Right),
            Action::Left => Some(Direction::Left),
            Action::Down => Some(Direction::Down),
            Action::Terminate => None,
        }
    }
}

/// Samples the direction actually taken for an intended move.
///
/// A single uniform draw `u` decides: `u < 0.9` keeps the intended direction,
/// otherwise the residual mass is split evenly over the other three.
pub fn slip_direction<R: Rng + ?Sized>(intended: Direction, rng: &mut R) -> Direction {
    slip_direction_with(intended, SLIP_PROB, rng)
}

/// [`slip_direction`] with an arbitrary total slip probability.
pub fn slip_direction_with<R: Rng + ?Sized>(intended: Direction, slip: f64, rng: &mut R) -> Direction {
    let u: f64 = rng.random();
    if u < 1.0 - slip {
        return intended;
    }
    let slot = (((u - (1.0 - slip)) / (slip / 3.0)) as usize).min(2);
    let others = Direction::ALL.iter().copied().filter(|d| *d != intended);
    others.into_iter().nth(slot).expect("three other directions")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub row: u8,
    pub col: u8,
}

impl Pos {
    pub const fn new(row: u8, col: u8) -> Self {
        Self { row, col }
    }

    fn offset(self, (dr, dc): (i32, i32)) -> Option<Pos> {
        let row = self.row as i32 + dr;
        let col = self.col as i32 + dc;
        if row < 0 || col < 0 || row > u8::MAX as i32 || col > u8::MAX as i32 {
            return None;
        }
        Some(Pos::new(row as u8, col as u8))
    }

    pub fn distance(self, other: Pos) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Position,
    Flag,
    Count,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableSchema {
    pub name: String,
    pub kind: VarKind,
    pub domain_size: usize,
    /// Largest 2-norm between any two values of the variable.
    pub diameter: f64,
}

/// Value of a single state variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VarValue {
    Pos(Pos),
    Int(u8),
}

/// The observable state: agent position plus the non-position variables.
///
/// `vars[k]` holds variable `k + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FactoredState {
    pub pos: Pos,
    pub vars: ArrayVec<u8, MAX_AUX_VARS>,
}

impl FactoredState {
    pub fn new(pos: Pos, vars: &[u8]) -> Self {
        Self { pos, vars: vars.iter().copied().collect() }
    }

    /// Number of variables including the position.
    pub fn len(&self) -> usize {
        self.vars.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self, index: usize) -> VarValue {
        if index == 0 {
            VarValue::Pos(self.pos)
        } else {
            VarValue::Int(self.vars[index - 1])
        }
    }

    /// Integer value of a non-position variable.
    pub fn get(&self, index: usize) -> u8 {
        debug_assert!(index > 0);
        self.vars[index - 1]
    }

    pub fn set(&mut self, index: usize, value: u8) {
        debug_assert!(index > 0);
        self.vars[index - 1] = value;
    }
}

/// Full environment state: the observation plus hidden internals.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnvState {
    pub obs: FactoredState,
    /// MudWorld only: bit `i` set when walkable cell `i` carries tracked mud.
    pub mud: u128,
}

impl EnvState {
    pub fn new(obs: FactoredState) -> Self {
        Self { obs, mud: 0 }
    }
}

/// Canonical tabular key of a state, a variable or a set of variables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateKey(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cell {
    Wall,
    Open,
    Tool(u8),
    ResourceA,
    ResourceB,
    Plant(u8),
    Mud,
    Puddle,
    Treasure,
}

/// Variable indices, per environment.
pub mod vars {
    pub const POSITION: usize = 0;

    pub mod fourrooms {
        pub const TOOLS: [usize; 4] = [1, 2, 3, 4];
    }

    pub mod forageworld {
        pub const RESOURCE_A: usize = 1;
        pub const RESOURCE_B: usize = 2;
        pub const PLANTS: [usize; 3] = [3, 4, 5];
    }

    pub mod mudworld {
        pub const MUDDY: usize = 1;
        pub const TREASURE: usize = 2;
        pub const MUD_COUNT: usize = 3;
    }
}

/// An immutable environment instance.
#[derive(Clone, Debug)]
pub struct Env {
    kind: EnvKind,
    rows: usize,
    cols: usize,
    cells: Vec<Cell>,
    walkable: Vec<Pos>,
    walk_index: Vec<Option<u16>>,
    schemas: Vec<VariableSchema>,
    start: Pos,
    goal: Pos,
    slip: f64,
}

impl Env {
    /// Parses a character layout (see [`Env::layout_string`]) into an environment.
    ///
    /// `kind` selects the cell-effect rules; `aux` lists the non-position
    /// variable schemas. Tool `k` in reading order sets variable `k + 1`.
    ///
    /// # Panics
    /// On ragged rows, unknown characters, a missing start or goal, or an open border.
    pub fn from_layout(kind: EnvKind, layout: &[&str], aux: Vec<VariableSchema>) -> Env {
        let rows = layout.len();
        let cols = layout[0].len();
        let mut cells = Vec::with_capacity(rows * cols);
        let mut start = None;
        let mut goal = None;
        let (mut tools, mut plants) = (0u8, 0u8);
        for (r, line) in layout.iter().enumerate() {
            assert_eq!(line.len(), cols, "ragged layout row {r}");
            for (c, ch) in line.chars().enumerate() {
                let cell = match ch {
                    '#' => Cell::Wall,
                    '.' => Cell::Open,
                    'S' => {
                        start = Some(Pos::new(r as u8, c as u8));
                        Cell::Open
                    }
                    'G' => {
                        goal = Some(Pos::new(r as u8, c as u8));
                        Cell::Open
                    }
                    'T' => {
                        tools += 1;
                        Cell::Tool(tools - 1)
                    }
                    'a' => Cell::ResourceA,
                    'b' => Cell::ResourceB,
                    'P' => {
                        plants += 1;
                        Cell::Plant(plants - 1)
                    }
                    'M' => Cell::Mud,
                    'W' => Cell::Puddle,
                    '$' => Cell::Treasure,
                    other => panic!("unknown layout character {other:?}"),
                };
                cells.push(cell);
            }
        }
        let mut walkable = Vec::new();
        let mut walk_index = vec![None; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                if cells[r * cols + c] != Cell::Wall {
                    walk_index[r * cols + c] = Some(walkable.len() as u16);
                    walkable.push(Pos::new(r as u8, c as u8));
                }
            }
        }
        let mut diameter: f64 = 0.0;
        for (i, a) in walkable.iter().enumerate() {
            for b in &walkable[i + 1..] {
                diameter = diameter.max(a.distance(*b));
            }
        }
        let mut schemas = vec![VariableSchema {
            name: "position".into(),
            kind: VarKind::Position,
            domain_size: walkable.len(),
            diameter,
        }];
        schemas.extend(aux);
        let env = Env {
            kind,
            rows,
            cols,
            cells,
            walkable,
            walk_index,
            schemas,
            start: start.expect("layout has a start cell"),
            goal: goal.expect("layout has a goal cell"),
            slip: SLIP_PROB,
        };
        assert!(env.border_is_wall(), "layout border must be wall");
        env
    }

    fn border_is_wall(&self) -> bool {
        (0..self.rows).all(|r| {
            (0..self.cols).all(|c| {
                let edge = r == 0 || c == 0 || r + 1 == self.rows || c + 1 == self.cols;
                !edge || self.cells[r * self.cols + c] == Cell::Wall
            })
        })
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    /// Replaces the slip probability; `0.0` gives deterministic movement.
    pub fn with_slip(mut self, slip: f64) -> Self {
        assert!((0.0..=1.0).contains(&slip), "slip probability must lie in [0, 1]");
        self.slip = slip;
        self
    }

    pub fn slip(&self) -> f64 {
        self.slip
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn schemas(&self) -> &[VariableSchema] {
        &self.schemas
    }

    /// Number of state variables N.
    pub fn num_vars(&self) -> usize {
        self.schemas.len()
    }

    pub fn start(&self) -> Pos {
        self.start
    }

    pub fn goal(&self) -> Pos {
        self.goal
    }

    pub fn walkable(&self) -> &[Pos] {
        &self.walkable
    }

    pub fn cell(&self, pos: Pos) -> Cell {
        let (r, c) = (pos.row as usize, pos.col as usize);
        if r >= self.rows || c >= self.cols {
            return Cell::Wall;
        }
        self.cells[r * self.cols + c]
    }

    pub fn walk_index(&self, pos: Pos) -> Option<usize> {
        let (r, c) = (pos.row as usize, pos.col as usize);
        if r >= self.rows || c >= self.cols {
            return None;
        }
        self.walk_index[r * self.cols + c].map(usize::from)
    }

    /// Domain size of variable `i`.
    pub fn domain(&self, i: usize) -> usize {
        self.schemas[i].domain_size
    }

    /// The canonical start state: agent on the start cell, every other variable zero.
    pub fn initial_state(&self) -> EnvState {
        EnvState::new(FactoredState::new(self.start, &vec![0; self.num_vars() - 1]))
    }

    pub fn validate(&self, state: &EnvState) -> Result<(), EnvError> {
        let obs = &state.obs;
        if obs.len() != self.num_vars() {
            return Err(EnvError::InvalidState(format!(
                "expected {} variables, got {}",
                self.num_vars(),
                obs.len()
            )));
        }
        if self.walk_index(obs.pos).is_none() {
            return Err(EnvError::InvalidState(format!("position {} is not walkable", obs.pos)));
        }
        for i in 1..self.num_vars() {
            if obs.get(i) as usize >= self.domain(i) {
                return Err(EnvError::InvalidState(format!(
                    "variable {} = {} outside domain 0..{}",
                    self.schemas[i].name,
                    obs.get(i),
                    self.domain(i)
                )));
            }
        }
        if self.kind == EnvKind::MudWorld {
            let tracked = state.mud.count_ones();
            if tracked != obs.get(vars::mudworld::MUD_COUNT) as u32 {
                return Err(EnvError::InvalidState(format!(
                    "mud count {} disagrees with {} tracked cells",
                    obs.get(vars::mudworld::MUD_COUNT),
                    tracked
                )));
            }
        } else if state.mud != 0 {
            return Err(EnvError::InvalidState("hidden mud map outside MudWorld".into()));
        }
        Ok(())
    }

    /// Applies one action. Validates the incoming state.
    pub fn step<R: Rng + ?Sized>(
        &self,
        state: &EnvState,
        action: Action,
        rng: &mut R,
    ) -> Result<EnvState, EnvError> {
        self.validate(state)?;
        Ok(self.transition(state, action, rng))
    }

    /// [`Env::step`] without validation, for states produced by this environment.
    pub fn transition<R: Rng + ?Sized>(&self, state: &EnvState, action: Action, rng: &mut R) -> EnvState {
        let Some(intended) = action.direction() else {
            return state.clone();
        };
        let dir = slip_direction_with(intended, self.slip, rng);
        self.move_agent(state, dir)
    }

    /// Deterministic movement in a fixed direction, with all cell effects.
    pub fn move_agent(&self, state: &EnvState, dir: Direction) -> EnvState {
        let mut next = state.clone();
        let target = match state.obs.pos.offset(dir.delta()) {
            Some(p) if self.cell(p) != Cell::Wall => p,
            _ => return next,
        };
        next.obs.pos = target;
        match self.cell(target) {
            Cell::Tool(k) => next.obs.set(1 + k as usize, 1),
            Cell::ResourceA => bump(&mut next.obs, vars::forageworld::RESOURCE_A, RESOURCE_CAP),
            Cell::ResourceB => bump(&mut next.obs, vars::forageworld::RESOURCE_B, RESOURCE_CAP),
            Cell::Plant(k) => next.obs.set(vars::forageworld::PLANTS[k as usize], 1),
            Cell::Mud => next.obs.set(vars::mudworld::MUDDY, 1),
            Cell::Puddle => next.obs.set(vars::mudworld::MUDDY, 0),
            Cell::Treasure => next.obs.set(vars::mudworld::TREASURE, 1),
            Cell::Open if self.kind == EnvKind::MudWorld => {
                use vars::mudworld::{MUDDY, MUD_COUNT};
                let bit = 1u128 << self.walk_index(target).expect("walkable");
                let count = next.obs.get(MUD_COUNT);
                if next.obs.get(MUDDY) == 1 && next.mud & bit == 0 && count < MUD_CAP {
                    next.mud |= bit;
                    next.obs.set(MUD_COUNT, count + 1);
                }
            }
            Cell::Open | Cell::Wall => {}
        }
        next
    }

    /// Number of observable states: the product of all variable domains.
    pub fn state_count(&self) -> u64 {
        self.schemas.iter().map(|s| s.domain_size as u64).product()
    }

    /// Mixed-radix key over all variables.
    pub fn state_key(&self, state: &FactoredState) -> StateKey {
        let mut key = 0u64;
        for i in (0..self.num_vars()).rev() {
            key = key * self.domain(i) as u64 + self.value_index(state, i);
        }
        StateKey(key)
    }

    /// Dense index of variable `i`'s value.
    pub fn value_index(&self, state: &FactoredState, i: usize) -> u64 {
        if i == 0 {
            self.walk_index(state.pos).expect("walkable position") as u64
        } else {
            state.get(i) as u64
        }
    }

    pub fn variable_key(&self, state: &FactoredState, i: usize) -> StateKey {
        StateKey(self.value_index(state, i))
    }

    /// Mixed-radix key over the listed variables, in the order given.
    pub fn variables_key(&self, state: &FactoredState, subset: &[usize]) -> StateKey {
        let mut key = 0u64;
        for &i in subset.iter().rev() {
            key = key * self.domain(i) as u64 + self.value_index(state, i);
        }
        StateKey(key)
    }

    /// Number of distinct keys [`Env::variables_key`] can produce for `subset`.
    pub fn subset_size(&self, subset: &[usize]) -> u64 {
        subset.iter().map(|&i| self.domain(i) as u64).product()
    }

    pub fn state_from_key(&self, key: StateKey) -> FactoredState {
        let mut rest = key.0;
        let pos_idx = (rest % self.domain(0) as u64) as usize;
        rest /= self.domain(0) as u64;
        let mut vars = ArrayVec::new();
        for i in 1..self.num_vars() {
            vars.push((rest % self.domain(i) as u64) as u8);
            rest /= self.domain(i) as u64;
        }
        FactoredState { pos: self.walkable[pos_idx], vars }
    }

    /// Every observable state, in key order.
    pub fn enumerate_states(&self) -> Vec<FactoredState> {
        (0..self.state_count()).map(|k| self.state_from_key(StateKey(k))).collect()
    }

    /// A consistent full state for an observation: tracked mud is placed on
    /// the first `count` vacant cells in row-major order.
    pub fn complete(&self, obs: FactoredState) -> EnvState {
        let mut state = EnvState::new(obs);
        if self.kind == EnvKind::MudWorld {
            let count = state.obs.get(vars::mudworld::MUD_COUNT) as usize;
            for (i, _) in self.walkable.iter().enumerate().filter(|(_, p)| self.cell(**p) == Cell::Open).take(count) {
                state.mud |= 1u128 << i;
            }
        }
        state
    }

    /// Plain-text map, one character per cell.
    pub fn layout_string(&self) -> String {
        let mut out = String::with_capacity(self.rows * (self.cols + 1));
        for r in 0..self.rows {
            for c in 0..self.cols {
                let pos = Pos::new(r as u8, c as u8);
                let ch = if pos == self.start {
                    'S'
                } else if pos == self.goal {
                    'G'
                } else {
                    match self.cell(pos) {
                        Cell::Wall => '#',
                        Cell::Open => '.',
                        Cell::Tool(_) => 'T',
                        Cell::ResourceA => 'a',
                        Cell::ResourceB => 'b',
                        Cell::Plant(_) => 'P',
                        Cell::Mud => 'M',
                        Cell::Puddle => 'W',
                        Cell::Treasure => '$',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

fn bump(state: &mut FactoredState, index: usize, cap: u8) {
    let v = state.get(index);
    state.set(index, (v + 1).min(cap));
}

pub fn flag(name: &str) -> VariableSchema {
    VariableSchema { name: name.into(), kind: VarKind::Flag, domain_size: 2, diameter: 1.0 }
}

pub fn count(name: &str, cap: u8) -> VariableSchema {
    VariableSchema { name: name.into(), kind: VarKind::Count, domain_size: cap as usize + 1, diameter: cap as f64 }
}

const FOURROOMS: [&str; 13] = [
    "#############",
    "#S....#.....#",
    "#.....#.....#",
    "#..T.....T..#",
    "#.....#.....#",
    "#.....#.....#",
    "##.####.....#",
    "#.....###.###",
    "#.T...#.....#",
    "#.....#..T..#",
    "#...........#",
    "#.....#....G#",
    "#############",
];

const FORAGEWORLD: [&str; 12] = [
    "############",
    "#S.P..a....#",
    "#..P..a....#",
    "#..........#",
    "#P.........#",
    "#..........#",
    "#b.........#",
    "#b.........#",
    "#..........#",
    "#..........#",
    "#.........G#",
    "############",
];

const MUDWORLD: [&str; 12] = [
    "############",
    "#S.........#",
    "#W#M#......#",
    "#.M$#......#",
    "#####......#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#..........#",
    "#.........G#",
    "############",
];

/// Sutton-style four rooms with one tool per room.
pub fn make_fourrooms() -> Env {
    let aux = (1..=4).map(|k| flag(&format!("tool{k}"))).collect();
    Env::from_layout(EnvKind::FourRooms, &FOURROOMS, aux)
}

/// Two resources to collect past three fragile plants.
pub fn make_forageworld() -> Env {
    let aux = vec![
        count("resource_a", RESOURCE_CAP),
        count("resource_b", RESOURCE_CAP),
        flag("plant1"),
        flag("plant2"),
        flag("plant3"),
    ];
    Env::from_layout(EnvKind::ForageWorld, &FORAGEWORLD, aux)
}

/// Treasure inside a mud patch; a puddle washes the agent clean.
pub fn make_mudworld() -> Env {
    let aux = vec![flag("muddy"), flag("treasure"), count("mud_cells", MUD_CAP)];
    let env = Env::from_layout(EnvKind::MudWorld, &MUDWORLD, aux);
    assert!(env.walkable.len() <= 128, "hidden mud map holds at most 128 cells");
    env
}
