//! DNF formulas and model enumeration through the flashlight pipeline.
//!
//! A formula is a disjunction of terms over variables `1..=n`, each term a
//! set of positive and a set of negative literals. A partial assignment
//! (some variables fixed true, some fixed false) extends to a model exactly
//! when some term is compatible with it: no positive literal fixed false and
//! no negative literal fixed true. That check is the extension oracle of a
//! flashlight search whose leaves are precisely the models, each produced
//! once.
//!
//! `dnf_enumerate` drives the search either directly, through the buffering
//! queue, or through the hybrid + geometric pipeline. The geometric route
//! calibrates itself with two passes: a solo traversal measuring path time,
//! model count and average delay, then a hybrid run measuring the
//! post-first-emission incremental delay that parameterizes the amortizer.

use std::fmt;
use std::rc::Rc;

use thiserror::Error;

use crate::amortizers::{
    geometric_regularize, queue_regularize, run_solo, AmortizeError, RegularizedRun,
    RegularizerConfig,
};
use crate::bitset::BitSet;
use crate::flashlight::{
    flashlight_enumerate, hybridize, FlashlightMachine, FlashlightProblem, FlashlightRun,
    PartialSolution,
};
use crate::metrics::Ratio;

/// One conjunctive term: `pos` variables must be true, `neg` must be false.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub pos: BitSet,
    pub neg: BitSet,
}

/// A DNF formula over variables `1..=num_vars` (stored zero-based).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DnfFormula {
    num_vars: usize,
    terms: Vec<Term>,
}

/// A total truth assignment, one bit per variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Assignment(pub BitSet);

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.to_bit_string())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DnfError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("term on line {line} contains x{var} both positively and negatively")]
    ContradictoryTerm { line: usize, var: usize },
    #[error("header declared {declared} terms but {found} were given")]
    TermCountMismatch { declared: usize, found: usize },
    #[error("fixed-true and fixed-false sets overlap on variable {var}")]
    OverlappingFixedSets { var: usize },
    #[error(transparent)]
    Amortize(#[from] AmortizeError),
    #[error(transparent)]
    Machine(#[from] crate::machine::MachineError),
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Drop contradictory terms with a warning instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    DroppedContradictoryTerm { line: usize, var: usize },
}

impl DnfFormula {
    pub fn new(num_vars: usize, terms: Vec<Term>) -> Self {
        DnfFormula { num_vars, terms }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Direct evaluation: does `assignment` satisfy some term?
    pub fn eval(&self, assignment: &BitSet) -> bool {
        self.terms.iter().any(|t| {
            t.pos.is_subset_of(assignment) && !t.neg.intersects(assignment)
        })
    }

    /// Extension oracle on a partial assignment: true iff some term has no
    /// positive literal in `fixed_false` and no negative literal in
    /// `fixed_true`.
    pub fn extension_check(
        &self,
        fixed_true: &BitSet,
        fixed_false: &BitSet,
    ) -> Result<bool, DnfError> {
        if fixed_true.intersects(fixed_false) {
            let var = (0..self.num_vars)
                .find(|&v| fixed_true.contains(v) && fixed_false.contains(v))
                .unwrap_or(0);
            return Err(DnfError::OverlappingFixedSets { var: var + 1 });
        }
        Ok(self.terms.iter().any(|t| {
            !t.pos.intersects(fixed_false) && !t.neg.intersects(fixed_true)
        }))
    }
}

/// Parse DIMACS-style DNF text: a `p dnf <vars> <terms>` header, then one
/// term per line as nonzero literals terminated by `0`. Lines starting with
/// `c` are comments.
pub fn parse_dnf(text: &str) -> Result<DnfFormula, DnfError> {
    let (formula, warnings) = parse_dnf_with(text, ParseOptions::default())?;
    debug_assert!(warnings.is_empty());
    Ok(formula)
}

pub fn parse_dnf_with(
    text: &str,
    options: ParseOptions,
) -> Result<(DnfFormula, Vec<ParseWarning>), DnfError> {
    let mut num_vars: Option<usize> = None;
    let mut declared_terms = 0usize;
    let mut terms = Vec::new();
    let mut warnings = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let body = raw.trim();
        if body.is_empty() || body.starts_with('c') {
            continue;
        }
        if body.starts_with('p') {
            if num_vars.is_some() {
                return Err(DnfError::Parse {
                    line,
                    message: "duplicate header".into(),
                });
            }
            let fields: Vec<&str> = body.split_whitespace().collect();
            if fields.len() != 4 || fields[1] != "dnf" {
                return Err(DnfError::Parse {
                    line,
                    message: "expected header `p dnf <vars> <terms>`".into(),
                });
            }
            let vars: usize = fields[2].parse().map_err(|_| DnfError::Parse {
                line,
                message: format!("bad variable count {:?}", fields[2]),
            })?;
            declared_terms = fields[3].parse().map_err(|_| DnfError::Parse {
                line,
                message: format!("bad term count {:?}", fields[3]),
            })?;
            num_vars = Some(vars);
            continue;
        }
        let n = num_vars.ok_or(DnfError::Parse {
            line,
            message: "term before header".into(),
        })?;
        let mut pos = BitSet::empty(n);
        let mut neg = BitSet::empty(n);
        let mut terminated = false;
        let mut contradiction = None;
        for field in body.split_whitespace() {
            if terminated {
                return Err(DnfError::Parse {
                    line,
                    message: "literals after the 0 terminator".into(),
                });
            }
            let lit: i64 = field.parse().map_err(|_| DnfError::Parse {
                line,
                message: format!("bad literal {field:?}"),
            })?;
            if lit == 0 {
                terminated = true;
                continue;
            }
            let var = lit.unsigned_abs() as usize;
            if var == 0 || var > n {
                return Err(DnfError::Parse {
                    line,
                    message: format!("literal {lit} out of range 1..={n}"),
                });
            }
            let idx = var - 1;
            if lit > 0 {
                if neg.contains(idx) {
                    contradiction.get_or_insert(var);
                }
                pos.insert(idx);
            } else {
                if pos.contains(idx) {
                    contradiction.get_or_insert(var);
                }
                neg.insert(idx);
            }
        }
        if !terminated {
            return Err(DnfError::Parse {
                line,
                message: "term not terminated by 0".into(),
            });
        }
        if let Some(var) = contradiction {
            if options.lenient {
                warnings.push(ParseWarning::DroppedContradictoryTerm { line, var });
                continue;
            }
            return Err(DnfError::ContradictoryTerm { line, var });
        }
        terms.push(Term { pos, neg });
    }
    let n = num_vars.ok_or(DnfError::Parse {
        line: text.lines().count().max(1),
        message: "missing `p dnf` header".into(),
    })?;
    let found = terms.len() + warnings.len();
    if found != declared_terms {
        return Err(DnfError::TermCountMismatch {
            declared: declared_terms,
            found,
        });
    }
    Ok((DnfFormula::new(n, terms), warnings))
}

/// The flashlight problem whose solutions are the models of a formula.
#[derive(Debug, Clone)]
pub struct DnfModels {
    formula: Rc<DnfFormula>,
}

impl DnfModels {
    pub fn new(formula: Rc<DnfFormula>) -> Self {
        DnfModels { formula }
    }
}

impl FlashlightProblem for DnfModels {
    fn universe_size(&self) -> usize {
        self.formula.num_vars()
    }

    /// `fixed` plays the fixed-true set; everything outside `allowed` is
    /// fixed false, so a term is compatible iff its positives stay within
    /// `allowed` and its negatives avoid `fixed`.
    fn extends(&self, node: &PartialSolution) -> bool {
        self.formula.terms().iter().any(|t| {
            t.pos.is_subset_of(&node.allowed) && !t.neg.intersects(&node.fixed)
        })
    }
}

/// Which route the models take from the search to the caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Pipeline {
    /// Plain flashlight traversal.
    Direct,
    /// Traversal behind the buffering queue regularizer.
    Queue,
    /// Hybrid machine behind geometric amortization.
    Geometric,
}

/// Calibration and override knobs for the amortized pipelines.
#[derive(Debug, Clone, Copy, Default)]
pub struct PipelineOptions {
    /// Path-time budget for the hybrid; measured (twice the solo maximum)
    /// when absent.
    pub path_time_bound: Option<u64>,
    /// Incremental delay handed to the amortizer; measured when absent.
    pub incremental_delay: Option<u64>,
    /// Solution bound for the geometric amortizer; the calibrated model
    /// count when absent.
    pub solution_bound: Option<u64>,
}

/// What the calibration passes measured.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Calibration {
    pub model_count: u64,
    pub max_path_mu: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path_time_bound: Option<u64>,
    pub incremental_delay: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solution_bound: Option<u64>,
    /// Average delay of the solo traversal.
    pub average_delay: Option<Ratio>,
}

/// A model-enumeration run: models in emission order plus the run report.
#[derive(Debug, Clone)]
pub struct DnfRun {
    pub models: Vec<Assignment>,
    pub run: RegularizedRun<BitSet>,
    pub calibration: Option<Calibration>,
}

pub fn dnf_enumerate(formula: &Rc<DnfFormula>, pipeline: Pipeline) -> Result<DnfRun, DnfError> {
    dnf_enumerate_with(formula, pipeline, PipelineOptions::default())
}

pub fn dnf_enumerate_with(
    formula: &Rc<DnfFormula>,
    pipeline: Pipeline,
    options: PipelineOptions,
) -> Result<DnfRun, DnfError> {
    let problem = DnfModels::new(Rc::clone(formula));
    let run = match pipeline {
        Pipeline::Direct => {
            let run = run_solo(FlashlightMachine::new(problem))?;
            return Ok(DnfRun {
                models: run.solutions.iter().cloned().map(Assignment).collect(),
                run,
                calibration: None,
            });
        }
        Pipeline::Queue => {
            let solo = calibrate_solo(&problem)?;
            let p = options
                .incremental_delay
                .unwrap_or_else(|| solo.incremental_sup_ceil().max(1));
            let run = queue_regularize(
                FlashlightMachine::new(problem),
                &RegularizerConfig::with_p(p),
            )?;
            DnfRun {
                models: run.solutions.iter().cloned().map(Assignment).collect(),
                calibration: Some(Calibration {
                    model_count: solo.solutions.len() as u64,
                    max_path_mu: solo.max_path_mu,
                    path_time_bound: None,
                    incremental_delay: p,
                    solution_bound: None,
                    average_delay: average_delay(&solo),
                }),
                run,
            }
        }
        Pipeline::Geometric => {
            let solo = calibrate_solo(&problem)?;
            if solo.solutions.is_empty() {
                let run = run_solo(FlashlightMachine::new(problem))?;
                return Ok(DnfRun {
                    models: Vec::new(),
                    run,
                    calibration: None,
                });
            }
            let path_time_bound = options
                .path_time_bound
                .unwrap_or_else(|| (2 * solo.max_path_mu).max(1));
            let p_geo = match options.incremental_delay {
                Some(p) => p,
                None => {
                    let calib = run_solo(hybridize(problem.clone(), path_time_bound))?;
                    post_first_incremental_sup(&calib).max(1)
                }
            };
            let solution_bound = options
                .solution_bound
                .unwrap_or(solo.solutions.len() as u64)
                .max(1);
            let cfg = RegularizerConfig::with_p(p_geo)
                .solution_bound(solution_bound)
                .preprocess(true);
            let run = geometric_regularize(
                || hybridize(problem.clone(), path_time_bound),
                &cfg,
            )?;
            DnfRun {
                models: run.solutions.iter().cloned().map(Assignment).collect(),
                calibration: Some(Calibration {
                    model_count: solo.solutions.len() as u64,
                    max_path_mu: solo.max_path_mu,
                    path_time_bound: Some(path_time_bound),
                    incremental_delay: p_geo,
                    solution_bound: Some(solution_bound),
                    average_delay: average_delay(&solo),
                }),
                run,
            }
        }
    };
    Ok(run)
}

fn calibrate_solo(problem: &DnfModels) -> Result<FlashlightRun, DnfError> {
    Ok(flashlight_enumerate(problem.clone())?)
}

fn average_delay(run: &FlashlightRun) -> Option<Ratio> {
    if run.solutions.is_empty() {
        None
    } else {
        Some(Ratio::new(run.mu_at_last_emission, run.solutions.len() as u64))
    }
}

/// `max_i (T(i+1) - T(1)) / i` over a hybrid run, rounded up.
fn post_first_incremental_sup(run: &RegularizedRun<BitSet>) -> u64 {
    let mut at = run.delay.preprocessing;
    let mut emission_moves = Vec::with_capacity(run.delay.gaps.len());
    for g in &run.delay.gaps {
        at += g;
        emission_moves.push(at);
    }
    if emission_moves.len() < 2 {
        return 1;
    }
    let t1 = emission_moves[0];
    let mut sup = 1u64;
    for (i, &t) in emission_moves.iter().enumerate().skip(1) {
        sup = sup.max((t - t1).div_ceil(i as u64));
    }
    sup
}

#[cfg(test)]
mod tests {
    use super::*;

    fn formula(text: &str) -> Rc<DnfFormula> {
        Rc::new(parse_dnf(text).unwrap())
    }

    /// Truth-table oracle: every assignment over n <= 16 variables checked
    /// by direct term evaluation.
    fn brute_force_models(f: &DnfFormula) -> Vec<BitSet> {
        let n = f.num_vars();
        assert!(n <= 16);
        (0u64..1 << n)
            .map(|v| BitSet::from_word(n, v))
            .filter(|a| f.eval(a))
            .collect()
    }

    #[test]
    fn parses_simple_formulas() {
        let f = formula("p dnf 2 1\n1 2 0\n");
        assert_eq!(f.num_vars(), 2);
        assert_eq!(f.terms().len(), 1);
        assert_eq!(f.terms()[0].pos.iter().collect::<Vec<_>>(), vec![0, 1]);

        let f = formula("p dnf 3 2\n1 2 0\n-3 0\n");
        assert_eq!(f.terms().len(), 2);
        assert_eq!(f.terms()[1].neg.iter().collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn comments_and_duplicate_literals_are_tolerated() {
        let f = formula("c a comment\np dnf 2 1\n1 1 2 0\n");
        assert_eq!(f.terms()[0].pos.len(), 2);
    }

    #[test]
    fn contradictory_term_is_an_error_or_dropped_when_lenient() {
        let text = "p dnf 2 1\n1 -1 0\n";
        assert_eq!(
            parse_dnf(text).unwrap_err(),
            DnfError::ContradictoryTerm { line: 2, var: 1 }
        );
        let (f, warnings) =
            parse_dnf_with(text, ParseOptions { lenient: true }).unwrap();
        assert_eq!(f.terms().len(), 0);
        assert_eq!(
            warnings,
            vec![ParseWarning::DroppedContradictoryTerm { line: 2, var: 1 }]
        );
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(
            parse_dnf("p dnf 2 1\n1 5 0\n").unwrap_err(),
            DnfError::Parse {
                line: 2,
                message: "literal 5 out of range 1..=2".into()
            }
        );
        assert!(matches!(
            parse_dnf("p cnf 2 1\n1 0\n").unwrap_err(),
            DnfError::Parse { line: 1, .. }
        ));
        assert_eq!(
            parse_dnf("p dnf 2 3\n1 0\n").unwrap_err(),
            DnfError::TermCountMismatch { declared: 3, found: 1 }
        );
    }

    #[test]
    fn extension_check_examples() {
        // (x1 and x2) or (not x3)
        let f = formula("p dnf 3 2\n1 2 0\n-3 0\n");
        let mut fixed_true = BitSet::empty(3);
        fixed_true.insert(2); // x3 true kills the second term only
        assert!(f.extension_check(&fixed_true, &BitSet::empty(3)).unwrap());

        let g = formula("p dnf 2 1\n1 2 0\n");
        let mut fixed_false = BitSet::empty(2);
        fixed_false.insert(1); // x2 false kills the only term
        assert!(!g.extension_check(&BitSet::empty(2), &fixed_false).unwrap());

        assert!(f.extension_check(&BitSet::empty(3), &BitSet::empty(3)).unwrap());

        let overlap = f.extension_check(&fixed_true, &fixed_true).unwrap_err();
        assert_eq!(overlap, DnfError::OverlappingFixedSets { var: 3 });
    }

    #[test]
    fn extension_check_on_total_assignments_matches_eval() {
        let f = formula("p dnf 4 3\n1 -2 0\n3 4 0\n-1 -4 0\n");
        for v in 0u64..16 {
            let a = BitSet::from_word(4, v);
            let complement = {
                let mut c = BitSet::full(4);
                for i in a.iter() {
                    c.remove(i);
                }
                c
            };
            assert_eq!(
                f.extension_check(&a, &complement).unwrap(),
                f.eval(&a),
                "assignment {v:04b}"
            );
        }
    }

    #[test]
    fn example_formula_has_five_models() {
        // (x1 and x2) or (not x3): 2 + 4 - 1 = 5 models of 8.
        let f = formula("p dnf 3 2\n1 2 0\n-3 0\n");
        assert_eq!(brute_force_models(&f).len(), 5);
        let run = dnf_enumerate(&f, Pipeline::Direct).unwrap();
        assert_eq!(run.models.len(), 5);
    }

    #[test]
    fn single_term_frees_the_other_variables() {
        let f = formula("p dnf 3 1\n1 0\n");
        let run = dnf_enumerate(&f, Pipeline::Direct).unwrap();
        assert_eq!(run.models.len(), 4);
        for m in &run.models {
            assert!(m.0.contains(0));
        }
    }

    #[test]
    fn unsatisfiable_formula_yields_an_empty_stream() {
        let (f, _) = parse_dnf_with(
            "p dnf 2 2\n1 -1 0\n2 -2 0\n",
            ParseOptions { lenient: true },
        )
        .unwrap();
        let f = Rc::new(f);
        for pipeline in [Pipeline::Direct, Pipeline::Queue, Pipeline::Geometric] {
            let run = dnf_enumerate(&f, pipeline).unwrap();
            assert!(run.models.is_empty(), "{pipeline:?}");
        }
    }

    #[test]
    fn all_pipelines_agree_with_the_truth_table() {
        let samples = [
            "p dnf 3 2\n1 2 0\n-3 0\n",
            "p dnf 4 3\n1 -2 0\n3 4 0\n-1 -4 0\n",
            "p dnf 5 2\n1 2 3 4 5 0\n-1 -2 -3 -4 -5 0\n",
            "p dnf 6 4\n1 0\n-2 3 0\n4 -5 0\n6 0\n",
        ];
        for text in samples {
            let f = formula(text);
            let mut expected = brute_force_models(&f);
            expected.sort();
            for pipeline in [Pipeline::Direct, Pipeline::Queue, Pipeline::Geometric] {
                let run = dnf_enumerate(&f, pipeline).unwrap();
                let mut got: Vec<BitSet> = run.models.iter().map(|a| a.0.clone()).collect();
                got.sort();
                assert_eq!(got, expected, "{pipeline:?} on {text:?}");
                // No repetitions.
                got.dedup();
                assert_eq!(got.len(), run.models.len(), "{pipeline:?} on {text:?}");
            }
        }
    }

    #[test]
    fn medium_instance_pipeline_matches_the_direct_run() {
        // 32 terms over 10 variables, systematically built without
        // contradictions.
        let n = 10;
        let mut terms = Vec::new();
        for t in 0..32usize {
            let mut pos = BitSet::empty(n);
            let mut neg = BitSet::empty(n);
            pos.insert(t % n);
            if t % 3 == 0 {
                neg.insert((t + 3) % n);
            }
            if t % 4 == 1 {
                pos.insert((t + 5) % n);
            }
            terms.push(Term { pos, neg });
        }
        let f = Rc::new(DnfFormula::new(n, terms));
        let direct = dnf_enumerate(&f, Pipeline::Direct).unwrap();
        let geo = dnf_enumerate(&f, Pipeline::Geometric).unwrap();
        let mut a: Vec<BitSet> = direct.models.iter().map(|m| m.0.clone()).collect();
        let mut b: Vec<BitSet> = geo.models.iter().map(|m| m.0.clone()).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(a.len(), brute_force_models(&f).len());
    }

    #[test]
    fn monotone_formulas_enumerate_completely() {
        let f = formula("p dnf 5 3\n1 2 0\n2 4 0\n5 0\n");
        assert!(f.terms().iter().all(|t| t.neg.is_empty()));
        let expected = brute_force_models(&f).len();
        for pipeline in [Pipeline::Direct, Pipeline::Geometric] {
            let run = dnf_enumerate(&f, pipeline).unwrap();
            assert_eq!(run.models.len(), expected, "{pipeline:?}");
        }
    }

    #[test]
    fn assignments_render_as_bit_strings() {
        let f = formula("p dnf 3 1\n1 -3 0\n");
        let run = dnf_enumerate(&f, Pipeline::Direct).unwrap();
        let strings: Vec<String> = run.models.iter().map(|m| m.to_string()).collect();
        for s in &strings {
            assert_eq!(s.len(), 3);
            assert!(s.starts_with('1') && s.ends_with('0'));
        }
    }
}
