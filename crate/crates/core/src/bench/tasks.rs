//! Desk-scale task families with exactly enumerable answer sets.

use std::collections::BTreeSet;
use std::io::Write;
use std::sync::OnceLock;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bench::vocab::{desk_vocabulary, digits, BAR, DESK_MASK, DIVIDE, EQUALS, MINUS, PLUS, TIMES};
use crate::error::{Error, Result};
use crate::models::OracleSupport;
use crate::seed::{derive_seed, StreamRng};
use crate::state::{SequenceState, TokenId};

/// Attempts per instance before generation gives up.
const MAX_ATTEMPTS: u64 = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Arithmetic,
    MiniSudoku,
    Countdown,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Arithmetic, TaskKind::MiniSudoku, TaskKind::Countdown];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Arithmetic => "arithmetic",
            TaskKind::MiniSudoku => "mini_sudoku",
            TaskKind::Countdown => "countdown",
        }
    }

    fn tag(self) -> u64 {
        self as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Operator {
    #[serde(rename = "+")]
    Add,
    #[serde(rename = "-")]
    Sub,
    #[serde(rename = "*")]
    Mul,
    #[serde(rename = "/")]
    Div,
}

impl Operator {
    pub const ALL: [Operator; 4] = [Operator::Add, Operator::Sub, Operator::Mul, Operator::Div];

    pub fn token(self) -> TokenId {
        match self {
            Operator::Add => PLUS,
            Operator::Sub => MINUS,
            Operator::Mul => TIMES,
            Operator::Div => DIVIDE,
        }
    }

    /// Non-negative exact result, or `None`.
    pub fn apply(self, a: u64, b: u64) -> Option<u64> {
        match self {
            Operator::Add => Some(a + b),
            Operator::Sub => a.checked_sub(b),
            Operator::Mul => Some(a * b),
            Operator::Div => (b != 0 && a % b == 0).then(|| a / b),
        }
    }
}

/// How the arithmetic oracle model spreads belief over answers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeliefModel {
    /// All mass on the correct answer.
    Exact,
    /// The correct answer plus off-by-one and carry-slip distractors.
    NearMiss,
    /// The correct answer `C` against two distractors that agree with each
    /// other at one answer digit and disagree at another, so the most
    /// confident single digit belongs to a wrong answer while `C` remains
    /// the most likely full answer.
    Adversarial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArithmeticParams {
    pub operand_digits: usize,
    pub ops: Vec<Operator>,
    pub belief: BeliefModel,
    /// Mass on the correct answer; the belief model's default when absent.
    pub correct_weight: Option<f64>,
}

impl Default for ArithmeticParams {
    fn default() -> Self {
        Self {
            operand_digits: 2,
            ops: vec![Operator::Add, Operator::Sub, Operator::Mul],
            belief: BeliefModel::NearMiss,
            correct_weight: None,
        }
    }
}

impl ArithmeticParams {
    pub fn adversarial() -> Self {
        Self { ops: vec![Operator::Add], belief: BeliefModel::Adversarial, ..Self::default() }
    }

    pub fn weight(&self) -> f64 {
        self.correct_weight.unwrap_or(match self.belief {
            BeliefModel::Exact => 1.0,
            BeliefModel::NearMiss => 0.7,
            BeliefModel::Adversarial => 0.4,
        })
    }

    fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.operand_digits) {
            return Err(Error::invalid(format!("operand_digits must be 1..=3, got {}", self.operand_digits)));
        }
        if self.ops.is_empty() {
            return Err(Error::invalid("arithmetic needs at least one operator"));
        }
        let w = self.weight();
        match self.belief {
            BeliefModel::Exact if w != 1.0 => Err(Error::invalid("exact belief puts weight 1 on the answer")),
            BeliefModel::NearMiss if !(w > 0.0 && w < 1.0) => {
                Err(Error::invalid(format!("near_miss correct_weight must be in (0, 1), got {w}")))
            }
            BeliefModel::Adversarial if !(w > 1.0 / 3.0 && w < 0.5) => Err(Error::invalid(format!(
                "adversarial correct_weight must be in (1/3, 1/2), got {w}"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SudokuParams {
    /// Number of revealed cells.
    pub clues: usize,
}

impl Default for SudokuParams {
    fn default() -> Self {
        Self { clues: 6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CountdownParams {
    pub operands: usize,
    pub max_operand: u32,
    pub ops: Vec<Operator>,
}

impl Default for CountdownParams {
    fn default() -> Self {
        Self { operands: 3, max_operand: 9, ops: Operator::ALL.to_vec() }
    }
}

/// Which task family to generate and how many instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub instance_count: usize,
    pub seed: u64,
    pub arithmetic: ArithmeticParams,
    pub mini_sudoku: SudokuParams,
    pub countdown: CountdownParams,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            kind: TaskKind::Arithmetic,
            instance_count: 500,
            seed: 0,
            arithmetic: ArithmeticParams::default(),
            mini_sudoku: SudokuParams::default(),
            countdown: CountdownParams::default(),
        }
    }
}

impl TaskSpec {
    pub fn new(kind: TaskKind, instance_count: usize, seed: u64) -> Self {
        Self { kind, instance_count, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            TaskKind::Arithmetic => self.arithmetic.validate(),
            TaskKind::MiniSudoku if self.mini_sudoku.clues > 16 => {
                Err(Error::invalid(format!("a 4x4 grid has 16 cells, got {} clues", self.mini_sudoku.clues)))
            }
            TaskKind::Countdown => {
                let c = &self.countdown;
                if !(2..=4).contains(&c.operands) {
                    return Err(Error::invalid(format!("countdown operands must be 2..=4, got {}", c.operands)));
                }
                if !(1..=9).contains(&c.max_operand) {
                    return Err(Error::invalid(format!("countdown max_operand must be 1..=9, got {}", c.max_operand)));
                }
                if c.ops.is_empty() {
                    return Err(Error::invalid("countdown needs at least one operator"));
                }
                Ok(())
            }
            TaskKind::MiniSudoku => Ok(()),
        }
    }
}

/// One generated problem.
#[derive(Debug, Clone)]
pub struct TaskInstance {
    pub kind: TaskKind,
    pub index: usize,
    pub prompt: SequenceState,
    /// What the oracle model believes: the support its predictions enumerate.
    pub belief: OracleSupport,
    /// Every acceptable complete sequence.
    pub valid: OracleSupport,
    /// One valid completion (the correct answer for arithmetic).
    pub reference: Vec<TokenId>,
}

impl TaskInstance {
    pub fn is_valid(&self, tokens: &[TokenId]) -> bool {
        self.valid.contains(tokens)
    }

    pub fn len(&self) -> usize {
        self.prompt.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prompt.is_empty()
    }
}

/// Generate `spec.instance_count` instances, deterministically per seed.
pub fn generate_task(spec: &TaskSpec) -> Result<Vec<TaskInstance>> {
    spec.validate()?;
    (0..spec.instance_count).map(|i| generate_instance(spec, i)).collect()
}

/// Generate instance `index` of `spec` alone.
pub fn generate_instance(spec: &TaskSpec, index: usize) -> Result<TaskInstance> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = StreamRng::seed_from_u64(derive_seed(spec.seed, &[spec.kind.tag(), index as u64, attempt]));
        let built = match spec.kind {
            TaskKind::Arithmetic => arithmetic(&spec.arithmetic, &mut rng)?,
            TaskKind::MiniSudoku => mini_sudoku(&spec.mini_sudoku, &mut rng)?,
            TaskKind::Countdown => countdown(&spec.countdown, &mut rng)?,
        };
        if let Some((prompt, belief, valid, reference)) = built {
            return Ok(TaskInstance { kind: spec.kind, index, prompt, belief, valid, reference });
        }
    }
    Err(Error::invalid(format!(
        "could not generate a satisfiable {} instance in {MAX_ATTEMPTS} attempts",
        spec.kind.name()
    )))
}

type Built = Option<(SequenceState, OracleSupport, OracleSupport, Vec<TokenId>)>;

fn masked_tail(prefix: &[TokenId], answer_len: usize) -> SequenceState {
    let mut tokens = prefix.to_vec();
    tokens.extend(std::iter::repeat_n(DESK_MASK, answer_len));
    SequenceState::new(tokens, DESK_MASK, 0)
}

fn with_answer(prefix: &[TokenId], answer: &[TokenId]) -> Vec<TokenId> {
    prefix.iter().chain(answer).copied().collect()
}

/// Width of the zero-padded answer field for `op` on `d`-digit operands.
pub fn answer_width(op: Operator, d: usize) -> usize {
    match op {
        Operator::Add => d + 1,
        Operator::Sub | Operator::Div => d,
        Operator::Mul => 2 * d,
    }
}

fn arithmetic(p: &ArithmeticParams, rng: &mut StreamRng) -> Result<Built> {
    let d = p.operand_digits;
    let max = 10u64.pow(d as u32);
    let op = p.ops[rng.random_range(0..p.ops.len())];
    let (a, b) = match op {
        Operator::Div => {
            let b = rng.random_range(1..max);
            let q = rng.random_range(0..=(max - 1) / b);
            (b * q, b)
        }
        _ => {
            let (a, b) = (rng.random_range(0..max), rng.random_range(0..max));
            if op == Operator::Sub && a < b {
                (b, a)
            } else {
                (a, b)
            }
        }
    };
    let c = op.apply(a, b).expect("operands are chosen so the result exists");
    let width = answer_width(op, d);

    let mut prefix = digits(a, d);
    prefix.push(op.token());
    prefix.extend(digits(b, d));
    prefix.push(EQUALS);
    let correct = digits(c, width);
    let reference = with_answer(&prefix, &correct);
    let vocab = desk_vocabulary();
    let valid = OracleSupport::uniform(vocab.clone(), vec![reference.clone()])?;

    let w = p.weight();
    let (answers, weights): (Vec<Vec<TokenId>>, Vec<f64>) = match p.belief {
        BeliefModel::Exact => (vec![correct], vec![1.0]),
        BeliefModel::NearMiss => {
            let limit = 10u64.pow(width as u32);
            let mut wrong = BTreeSet::new();
            wrong.insert(c + 1);
            if c > 0 {
                wrong.insert(c - 1);
            }
            if let Some(slip) = carry_slip(op, a, b, d) {
                wrong.insert(slip);
            }
            wrong.remove(&c);
            let wrong: Vec<u64> = wrong.into_iter().filter(|&v| v < limit).collect();
            if wrong.is_empty() {
                return Ok(None);
            }
            let each = (1.0 - w) / wrong.len() as f64;
            let mut answers = vec![correct];
            let mut weights = vec![w];
            for v in wrong {
                answers.push(digits(v, width));
                weights.push(each);
            }
            (answers, weights)
        }
        BeliefModel::Adversarial => {
            if width < 2 {
                return Err(Error::invalid("adversarial belief needs answers of at least two digits"));
            }
            let picks = sample(rng, width, 2);
            let (s, q) = (picks.index(0), picks.index(1));
            let shared = other_digits(correct[s], &[], rng, 1)[0];
            let split = other_digits(correct[q], &[], rng, 2);
            let mut d1 = correct.clone();
            let mut d2 = correct.clone();
            d1[s] = shared;
            d2[s] = shared;
            d1[q] = split[0];
            d2[q] = split[1];
            (vec![correct, d1, d2], vec![w, (1.0 - w) / 2.0, (1.0 - w) / 2.0])
        }
    };
    let seqs = answers.iter().map(|ans| with_answer(&prefix, ans)).collect();
    let belief = OracleSupport::new(vocab, seqs, weights)?;
    Ok(Some((masked_tail(&prefix, width), belief, valid, reference)))
}

/// `n` distinct digits different from `avoid` and from `also`.
fn other_digits(avoid: TokenId, also: &[TokenId], rng: &mut StreamRng, n: usize) -> Vec<TokenId> {
    let mut pool: Vec<TokenId> = (0..10).filter(|t| *t != avoid && !also.contains(t)).collect();
    pool.shuffle(rng);
    pool.truncate(n);
    pool
}

/// The answer with every carry (or borrow) dropped, when that differs in kind.
fn carry_slip(op: Operator, a: u64, b: u64, d: usize) -> Option<u64> {
    let (da, db) = (digits(a, d), digits(b, d));
    let slipped: Vec<u64> = match op {
        Operator::Add => da.iter().zip(&db).map(|(x, y)| ((x + y) % 10) as u64).collect(),
        Operator::Sub => da.iter().zip(&db).map(|(x, y)| x.abs_diff(*y) as u64).collect(),
        Operator::Mul | Operator::Div => return None,
    };
    Some(slipped.iter().fold(0, |acc, &x| acc * 10 + x))
}

/// All 288 valid 4x4 Sudoku grids (digits 1-4, rows, columns and 2x2 boxes
/// each a permutation), row-major.
pub fn sudoku_grids() -> &'static [Vec<TokenId>] {
    static GRIDS: OnceLock<Vec<Vec<TokenId>>> = OnceLock::new();
    GRIDS.get_or_init(|| {
        let mut out = Vec::new();
        let mut grid = [0 as TokenId; 16];
        fill_sudoku(&mut grid, 0, &mut out);
        out
    })
}

fn fill_sudoku(grid: &mut [TokenId; 16], cell: usize, out: &mut Vec<Vec<TokenId>>) {
    if cell == 16 {
        out.push(grid.to_vec());
        return;
    }
    let (r, c) = (cell / 4, cell % 4);
    for v in 1..=4 {
        let clash = (0..cell).any(|j| {
            let (rj, cj) = (j / 4, j % 4);
            grid[j] == v && (rj == r || cj == c || (rj / 2 == r / 2 && cj / 2 == c / 2))
        });
        if !clash {
            grid[cell] = v;
            fill_sudoku(grid, cell + 1, out);
        }
    }
    grid[cell] = 0;
}

fn mini_sudoku(p: &SudokuParams, rng: &mut StreamRng) -> Result<Built> {
    let grids = sudoku_grids();
    let solution = grids[rng.random_range(0..grids.len())].clone();
    let clues: Vec<usize> = sample(rng, 16, p.clues).into_vec();
    let mut tokens = vec![DESK_MASK; 16];
    for &i in &clues {
        tokens[i] = solution[i];
    }
    let completions: Vec<Vec<TokenId>> = grids
        .iter()
        .filter(|g| clues.iter().all(|&i| g[i] == solution[i]))
        .cloned()
        .collect();
    let support = OracleSupport::uniform(desk_vocabulary(), completions)?;
    Ok(Some((SequenceState::new(tokens, DESK_MASK, 0), support.clone(), support, solution)))
}

/// Value of `operands` combined left to right by `ops`, if every
/// intermediate result is a non-negative integer.
pub fn evaluate_left_to_right(operands: &[u64], ops: &[Operator]) -> Option<u64> {
    let (&first, rest) = operands.split_first()?;
    rest.iter().zip(ops).try_fold(first, |acc, (&x, op)| op.apply(acc, x))
}

/// Expression token strings over every ordering of `operands` and every
/// operator sequence from `ops` that evaluate to `target`, deduplicated.
pub fn countdown_expressions(operands: &[u64], ops: &[Operator], target: u64) -> Vec<Vec<TokenId>> {
    let mut found = BTreeSet::new();
    let mut order: Vec<usize> = (0..operands.len()).collect();
    let slots = operands.len().saturating_sub(1);
    permute(&mut order, 0, &mut |perm| {
        let vals: Vec<u64> = perm.iter().map(|&i| operands[i]).collect();
        let combos = ops.len().pow(slots as u32);
        for code in 0..combos {
            let mut c = code;
            let seq: Vec<Operator> = (0..slots)
                .map(|_| {
                    let o = ops[c % ops.len()];
                    c /= ops.len();
                    o
                })
                .collect();
            if evaluate_left_to_right(&vals, &seq) == Some(target) {
                let mut expr = vec![vals[0] as TokenId];
                for (o, &v) in seq.iter().zip(&vals[1..]) {
                    expr.push(o.token());
                    expr.push(v as TokenId);
                }
                found.insert(expr);
            }
        }
    });
    found.into_iter().collect()
}

fn permute(items: &mut [usize], k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Prompt prefix: operands, `|`, the three-digit target, `=`.
pub fn countdown_prefix(operands: &[u64], target: u64) -> Vec<TokenId> {
    let mut prefix: Vec<TokenId> = operands.iter().map(|&v| v as TokenId).collect();
    prefix.push(BAR);
    prefix.extend(digits(target, 3));
    prefix.push(EQUALS);
    prefix
}

fn countdown(p: &CountdownParams, rng: &mut StreamRng) -> Result<Built> {
    let operands: Vec<u64> = (0..p.operands).map(|_| rng.random_range(1..=p.max_operand as u64)).collect();
    let mut order = operands.clone();
    order.shuffle(rng);
    let ops: Vec<Operator> = (1..p.operands).map(|_| p.ops[rng.random_range(0..p.ops.len())]).collect();
    let target = match evaluate_left_to_right(&order, &ops) {
        Some(t) if t <= 999 => t,
        _ => return Ok(None),
    };
    let exprs = countdown_expressions(&operands, &p.ops, target);
    if exprs.is_empty() {
        return Ok(None);
    }
    let prefix = countdown_prefix(&operands, target);
    let seqs: Vec<Vec<TokenId>> = exprs.iter().map(|e| with_answer(&prefix, e)).collect();
    let reference = seqs[0].clone();
    let support = OracleSupport::uniform(desk_vocabulary(), seqs)?;
    Ok(Some((masked_tail(&prefix, 2 * p.operands - 1), support.clone(), support, reference)))
}

#[derive(Serialize)]
struct DatasetLine<'a> {
    prompt: &'a [TokenId],
    length: usize,
    support_size: usize,
    task: &'static str,
}

/// One JSON object per line: prompt ids, length, support size, task name.
pub fn write_dataset<W: Write>(instances: &[TaskInstance], mut out: W) -> Result<()> {
    for inst in instances {
        let line = DatasetLine {
            prompt: &inst.prompt.tokens,
            length: inst.len(),
            support_size: inst.belief.size(),
            task: inst.kind.name(),
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
