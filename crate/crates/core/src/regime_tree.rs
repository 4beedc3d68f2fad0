//! Binary decision trees over standardized macro variables.
//!
//! Each internal node holds a rule `x < threshold`; periods satisfying it go
//! to the `yes` child, the rest to `no`. Leaves carry regime ids `1..=G`,
//! numbered depth-first with `yes` before `no` after every split.
//!
//! JSON form (nested, lossless):
//!
//! ```json
//! {"var": "UNRATE", "threshold": 0.6,
//!  "yes": {"regime": 1},
//!  "no":  {"var": "UNRATE", "threshold": 0.2, "yes": {"regime": 2}, "no": {"regime": 3}}}
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel_io::MacroPanel;

pub const DEFAULT_THRESHOLDS: [f64; 4] = [0.2, 0.4, 0.6, 0.8];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Split {
        var: String,
        threshold: f64,
        yes: Box<TreeNode>,
        no: Box<TreeNode>,
    },
    Leaf {
        regime: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegimeTree {
    root: TreeNode,
}

/// A leaf together with the rules on its path from the root.
#[derive(Clone, Debug, PartialEq)]
pub struct LeafInfo {
    pub regime: usize,
    /// `Y`/`N` per edge from the root; empty for the root itself.
    pub path: String,
    pub rules: Vec<(String, f64, bool)>,
}

impl LeafInfo {
    pub fn depth(&self) -> usize {
        self.path.len()
    }

    /// Human-readable conjunction of the rules leading to this leaf.
    pub fn describe(&self) -> String {
        if self.rules.is_empty() {
            return "all periods".to_string();
        }
        self.rules
            .iter()
            .map(|(v, c, yes)| if *yes { format!("{v} < {c}") } else { format!("{v} >= {c}") })
            .collect::<Vec<_>>()
            .join(" & ")
    }
}

/// Candidate partition of one leaf.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitCandidate {
    /// Regime id of the leaf to split.
    pub leaf: usize,
    pub variable: String,
    pub threshold: f64,
}

impl fmt::Display for SplitCandidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "leaf {}: {} < {}", self.leaf, self.variable, self.threshold)
    }
}

/// Regime index for every period.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegimeLabels {
    /// Zero-based regime index per period (regime id minus one).
    labels: Vec<usize>,
    n_regimes: usize,
}

impl RegimeLabels {
    pub fn new(labels: Vec<usize>, n_regimes: usize) -> Result<Self> {
        if n_regimes == 0 {
            return Err(Error::Domain("need at least one regime".into()));
        }
        if let Some(bad) = labels.iter().find(|&&g| g >= n_regimes) {
            return Err(Error::Domain(format!("label {bad} outside 0..{n_regimes}")));
        }
        Ok(Self { labels, n_regimes })
    }

    pub fn single(t: usize) -> Self {
        Self {
            labels: vec![0; t],
            n_regimes: 1,
        }
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_regimes(&self) -> usize {
        self.n_regimes
    }

    pub fn get(&self, t: usize) -> usize {
        self.labels[t]
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.n_regimes];
        for &g in &self.labels {
            c[g] += 1;
        }
        c
    }

    /// Labels restricted to the periods `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Self {
        Self {
            labels: self.labels[range].to_vec(),
            n_regimes: self.n_regimes,
        }
    }
}

impl Default for RegimeTree {
    fn default() -> Self {
        Self::single_leaf()
    }
}

impl RegimeTree {
    pub fn single_leaf() -> Self {
        Self {
            root: TreeNode::Leaf { regime: 1 },
        }
    }

    /// Builds a tree from an explicit root, checking leaf numbering.
    pub fn from_root(root: TreeNode) -> Result<Self> {
        let tree = Self { root };
        tree.validate()?;
        Ok(tree)
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn validate(&self) -> Result<()> {
        let leaves = self.leaves();
        for (i, leaf) in leaves.iter().enumerate() {
            if leaf.regime != i + 1 {
                return Err(Error::Invalid(format!(
                    "leaf ids must be 1..G in depth-first order; found {} at position {}",
                    leaf.regime,
                    i + 1
                )));
            }
        }
        fn check(node: &TreeNode) -> Result<()> {
            if let TreeNode::Split { threshold, yes, no, .. } = node {
                if !threshold.is_finite() {
                    return Err(Error::Invalid("non-finite threshold".into()));
                }
                check(yes)?;
                check(no)?;
            }
            Ok(())
        }
        check(&self.root)
    }

    pub fn n_regimes(&self) -> usize {
        fn count(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { yes, no, .. } => count(yes) + count(no),
            }
        }
        count(&self.root)
    }

    /// Leaves in depth-first `yes`-first order.
    pub fn leaves(&self) -> Vec<LeafInfo> {
        fn walk(node: &TreeNode, path: &mut String, rules: &mut Vec<(String, f64, bool)>, out: &mut Vec<LeafInfo>) {
            match node {
                TreeNode::Leaf { regime } => out.push(LeafInfo {
                    regime: *regime,
                    path: path.clone(),
                    rules: rules.clone(),
                }),
                TreeNode::Split { var, threshold, yes, no } => {
                    for (child, tag, is_yes) in [(yes, 'Y', true), (no, 'N', false)] {
                        path.push(tag);
                        rules.push((var.clone(), *threshold, is_yes));
                        walk(child, path, rules, out);
                        rules.pop();
                        path.pop();
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut String::new(), &mut Vec::new(), &mut out);
        out
    }

    pub fn leaf(&self, regime: usize) -> Option<LeafInfo> {
        self.leaves().into_iter().find(|l| l.regime == regime)
    }

    /// Names of every variable used by a rule.
    pub fn variables(&self) -> Vec<String> {
        let mut vars: Vec<String> = self
            .leaves()
            .into_iter()
            .flat_map(|l| l.rules.into_iter().map(|r| r.0))
            .collect();
        vars.sort();
        vars.dedup();
        vars
    }

    /// Regime id reached by a single period, looking values up by name.
    pub fn route<F>(&self, mut value_of: F) -> Result<usize>
    where
        F: FnMut(&str) -> Result<f64>,
    {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { regime } => return Ok(*regime),
                TreeNode::Split { var, threshold, yes, no } => {
                    node = if value_of(var)? < *threshold { yes } else { no };
                }
            }
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let tree: RegimeTree =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("invalid tree JSON: {e}")))?;
        tree.validate()?;
        Ok(tree)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// Regime label of every period of `panel`.
pub fn assign_labels(tree: &RegimeTree, panel: &MacroPanel) -> Result<RegimeLabels> {
    let vars = tree.variables();
    let cols: Vec<(String, usize)> = vars
        .iter()
        .map(|v| panel.candidate_index(v).map(|j| (v.clone(), j)))
        .collect::<Result<_>>()?;
    let labels = (0..panel.len())
        .map(|t| {
            tree.route(|name| {
                let j = cols.iter().find(|(v, _)| v == name).map(|(_, j)| *j).expect("variable resolved above");
                Ok(panel.split_candidates[(t, j)])
            })
            .map(|id| id - 1)
        })
        .collect::<Result<Vec<_>>>()?;
    RegimeLabels::new(labels, tree.n_regimes())
}

/// Open interval of `var` values compatible with the rules on a leaf's path.
fn feasible_interval(leaf: &LeafInfo, var: &str) -> (f64, f64) {
    leaf.rules
        .iter()
        .filter(|(v, _, _)| v == var)
        .fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), (_, c, yes)| {
            if *yes {
                (lo, hi.min(*c))
            } else {
                (lo.max(*c), hi)
            }
        })
}

/// Every admissible `(leaf, variable, threshold)` split of the current tree.
///
/// A candidate is admissible when both children keep at least `min_months`
/// periods and the grown tree stays within `max_regimes` leaves.
pub fn enumerate_candidates(
    tree: &RegimeTree,
    panel: &MacroPanel,
    thresholds: &[f64],
    min_months: usize,
    max_regimes: usize,
) -> Result<Vec<SplitCandidate>> {
    if tree.n_regimes() >= max_regimes {
        return Ok(Vec::new());
    }
    let labels = assign_labels(tree, panel)?;
    let mut out = Vec::new();
    for leaf in tree.leaves() {
        let members: Vec<usize> = (0..panel.len()).filter(|&t| labels.get(t) == leaf.regime - 1).collect();
        if members.len() < 2 * min_months {
            continue;
        }
        for (j, name) in panel.candidate_names.iter().enumerate() {
            let (lo, hi) = feasible_interval(&leaf, name);
            for &c in thresholds {
                if !(lo < c && c < hi) {
                    continue;
                }
                let left = members.iter().filter(|&&t| panel.split_candidates[(t, j)] < c).count();
                let right = members.len() - left;
                if left >= min_months && right >= min_months {
                    out.push(SplitCandidate {
                        leaf: leaf.regime,
                        variable: name.clone(),
                        threshold: c,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Replaces leaf `c.leaf` by the rule `c.variable < c.threshold` and
/// renumbers leaves depth-first.
pub fn apply_split(tree: &RegimeTree, c: &SplitCandidate) -> Result<RegimeTree> {
    let leaf = tree
        .leaf(c.leaf)
        .ok_or_else(|| Error::InadmissibleSplit(format!("no leaf with regime id {}", c.leaf)))?;
    if !c.threshold.is_finite() {
        return Err(Error::InadmissibleSplit("non-finite threshold".into()));
    }
    let (lo, hi) = feasible_interval(&leaf, &c.variable);
    if !(lo < c.threshold && c.threshold < hi) {
        return Err(Error::InadmissibleSplit(format!(
            "{c} repeats an ancestor rule and would leave a child empty"
        )));
    }
    fn replace(node: &TreeNode, target: usize, c: &SplitCandidate) -> TreeNode {
        match node {
            TreeNode::Leaf { regime } if *regime == target => TreeNode::Split {
                var: c.variable.clone(),
                threshold: c.threshold,
                yes: Box::new(TreeNode::Leaf { regime: 0 }),
                no: Box::new(TreeNode::Leaf { regime: 0 }),
            },
            TreeNode::Leaf { regime } => TreeNode::Leaf { regime: *regime },
            TreeNode::Split { var, threshold, yes, no } => TreeNode::Split {
                var: var.clone(),
                threshold: *threshold,
                yes: Box::new(replace(yes, target, c)),
                no: Box::new(replace(no, target, c)),
            },
        }
    }
    fn renumber(node: &mut TreeNode, next: &mut usize) {
        match node {
            TreeNode::Leaf { regime } => {
                *regime = *next;
                *next += 1;
            }
            TreeNode::Split { yes, no, .. } => {
                renumber(yes, next);
                renumber(no, next);
            }
        }
    }
    let mut root = replace(&tree.root, c.leaf, c);
    renumber(&mut root, &mut 1);
    Ok(RegimeTree { root })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel_io::YearMonth;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn panel(names: &[&str], rows: Vec<Vec<f64>>) -> MacroPanel {
        let t = rows.len();
        let s = names.len();
        MacroPanel {
            dates: (0..t).map(|i| YearMonth::new(2000, 1).unwrap().add_months(i)).collect(),
            factor_names: vec![],
            model_factors: DMatrix::zeros(t, 0),
            candidate_names: names.iter().map(|s| s.to_string()).collect(),
            split_candidates: DMatrix::from_fn(t, s, |i, j| rows[i][j]),
            warmup_len: 0,
        }
    }

    fn figure_tree() -> RegimeTree {
        let first = apply_split(
            &RegimeTree::single_leaf(),
            &SplitCandidate { leaf: 1, variable: "UNRATE".into(), threshold: 0.7 },
        )
        .unwrap();
        apply_split(&first, &SplitCandidate { leaf: 1, variable: "OILPRICE".into(), threshold: 0.3 }).unwrap()
    }

    #[test]
    fn single_leaf_labels_everything_one() {
        let p = panel(&["UNRATE"], vec![vec![0.1], vec![0.9]]);
        let labels = assign_labels(&RegimeTree::single_leaf(), &p).unwrap();
        assert_eq!(labels.as_slice(), &[0, 0]);
        assert_eq!(labels.counts(), vec![2]);
    }

    #[test]
    fn illustrative_tree_routes_points() {
        let tree = figure_tree();
        assert_eq!(tree.n_regimes(), 3);
        let leaves = tree.leaves();
        // yes/yes, yes/no, no in depth-first order
        assert_eq!(leaves.iter().map(|l| l.path.as_str()).collect::<Vec<_>>(), ["YY", "YN", "N"]);
        let p = panel(
            &["UNRATE", "OILPRICE"],
            vec![vec![0.5, 0.6], vec![0.5, 0.1], vec![0.9, 0.1], vec![0.7, 0.0]],
        );
        let labels = assign_labels(&tree, &p).unwrap();
        // (0.5, 0.6): unemployment below 0.7, oil above 0.3 -> the YN leaf
        assert_eq!(tree.leaf(labels.get(0) + 1).unwrap().path, "YN");
        assert_eq!(labels.as_slice(), &[1, 0, 2, 2]);
        // exactly at the threshold goes to the `no` branch
        assert_eq!(tree.leaf(labels.get(3) + 1).unwrap().path, "N");
    }

    #[test]
    fn unknown_variable_is_rejected() {
        let p = panel(&["UNRATE"], vec![vec![0.5]]);
        assert!(matches!(assign_labels(&figure_tree(), &p), Err(Error::UnknownVariable(_))));
    }

    #[test]
    fn json_round_trip_and_schema() {
        let tree = figure_tree();
        let json = tree.to_json();
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["var"], "UNRATE");
        assert_eq!(value["no"]["regime"], 3);
        assert_eq!(value["yes"]["var"], "OILPRICE");
        assert_eq!(RegimeTree::from_json(&json).unwrap(), tree);
        assert!(RegimeTree::from_json(r#"{"regime": 2}"#).is_err());
    }

    #[test]
    fn repeated_split_is_rejected() {
        let c = SplitCandidate { leaf: 1, variable: "UNRATE".into(), threshold: 0.7 };
        let once = apply_split(&RegimeTree::single_leaf(), &c).unwrap();
        assert_eq!(once.n_regimes(), 2);
        assert!(matches!(apply_split(&once, &c), Err(Error::InadmissibleSplit(_))));
        let missing = SplitCandidate { leaf: 7, variable: "UNRATE".into(), threshold: 0.4 };
        assert!(apply_split(&once, &missing).is_err());
    }

    #[test]
    fn candidates_respect_month_and_regime_limits() {
        // 30 months, only 3 of them below 0.2
        let rows: Vec<Vec<f64>> = (0..30).map(|t| vec![if t < 3 { 0.1 } else { 0.5 + (t as f64) / 100.0 }]).collect();
        let p = panel(&["UNRATE"], rows);
        let c = enumerate_candidates(&RegimeTree::single_leaf(), &p, &DEFAULT_THRESHOLDS, 3, 3).unwrap();
        assert!(c.iter().any(|c| c.threshold == 0.2));
        let c = enumerate_candidates(&RegimeTree::single_leaf(), &p, &DEFAULT_THRESHOLDS, 4, 3).unwrap();
        assert!(c.iter().all(|c| c.threshold != 0.2));
        let full = figure_tree();
        let p2 = panel(&["UNRATE", "OILPRICE"], vec![vec![0.5, 0.5]; 100]);
        assert!(enumerate_candidates(&full, &p2, &DEFAULT_THRESHOLDS, 1, 3).unwrap().is_empty());
    }

    #[test]
    fn root_candidate_count_bounded() {
        let names = crate::panel_io::SPLIT_CANDIDATES;
        let rows: Vec<Vec<f64>> = (0..617)
            .map(|t| (0..10).map(|j| ((t * (j + 3)) % 97) as f64 / 97.0).collect())
            .collect();
        let p = panel(&names, rows);
        let c = enumerate_candidates(&RegimeTree::single_leaf(), &p, &DEFAULT_THRESHOLDS, 24, 3).unwrap();
        assert!(c.len() <= 40 && !c.is_empty());
        let labels = assign_labels(&RegimeTree::single_leaf(), &p).unwrap();
        for cand in &c {
            let child = apply_split(&RegimeTree::single_leaf(), cand).unwrap();
            let counts = assign_labels(&child, &p).unwrap().counts();
            assert!(counts.iter().all(|&n| n >= 24));
            assert_eq!(counts.iter().sum::<usize>(), labels.len());
        }
    }

    fn arb_panel() -> impl Strategy<Value = MacroPanel> {
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 20..80)
            .prop_map(|rows| panel(&["A", "B", "C"], rows))
    }

    proptest! {
        #[test]
        fn enumeration_matches_brute_force(p in arb_panel(), min_months in 1usize..12) {
            let thresholds = DEFAULT_THRESHOLDS;
            let mut tree = RegimeTree::single_leaf();
            for _ in 0..2 {
                let fast = enumerate_candidates(&tree, &p, &thresholds, min_months, 3).unwrap();
                let mut brute = Vec::new();
                for leaf in 1..=tree.n_regimes() {
                    for var in &p.candidate_names {
                        for &c in &thresholds {
                            let cand = SplitCandidate { leaf, variable: var.clone(), threshold: c };
                            let Ok(grown) = apply_split(&tree, &cand) else { continue };
                            let before = assign_labels(&tree, &p).unwrap();
                            let after = assign_labels(&grown, &p).unwrap();
                            // the two children are the regimes that absorbed the old leaf
                            let mut child_counts = vec![0usize; grown.n_regimes()];
                            for t in 0..p.len() {
                                if before.get(t) == leaf - 1 {
                                    child_counts[after.get(t)] += 1;
                                }
                            }
                            let children: Vec<usize> = child_counts.into_iter().filter(|&n| n > 0).collect();
                            if children.len() == 2 && children.iter().all(|&n| n >= min_months) && grown.n_regimes() <= 3 {
                                brute.push(cand);
                            }
                        }
                    }
                }
                prop_assert_eq!(&fast, &brute);
                match fast.first() {
                    Some(c) => tree = apply_split(&tree, c).unwrap(),
                    None => break,
                }
            }
        }

        #[test]
        fn split_refines_partition(p in arb_panel(), var in 0usize..3, th in 0usize..4) {
            let tree = RegimeTree::single_leaf();
            let c = SplitCandidate { leaf: 1, variable: p.candidate_names[var].clone(), threshold: DEFAULT_THRESHOLDS[th] };
            let one = apply_split(&tree, &c).unwrap();
            let c2 = SplitCandidate { leaf: 2, variable: p.candidate_names[(var + 1) % 3].clone(), threshold: 0.5 };
            let two = apply_split(&one, &c2).unwrap();
            let l1 = assign_labels(&one, &p).unwrap();
            let l2 = assign_labels(&two, &p).unwrap();
            for t in 0..p.len() {
                // leaf 1 is untouched by the second split and keeps its id
                prop_assert_eq!(l1.get(t) == 0, l2.get(t) == 0);
            }
        }

        #[test]
        fn labels_depend_only_on_same_period(p in arb_panel(), cut in 1usize..19) {
            let tree = figure_like(&p);
            let full = assign_labels(&tree, &p).unwrap();
            let mut head = p.clone();
            head.dates.truncate(cut);
            head.split_candidates = p.split_candidates.rows(0, cut).clone_owned();
            let part = assign_labels(&tree, &head).unwrap();
            prop_assert_eq!(part.as_slice(), &full.as_slice()[..cut]);
        }
    }

    fn figure_like(p: &MacroPanel) -> RegimeTree {
        let a = apply_split(
            &RegimeTree::single_leaf(),
            &SplitCandidate { leaf: 1, variable: p.candidate_names[0].clone(), threshold: 0.6 },
        )
        .unwrap();
        apply_split(&a, &SplitCandidate { leaf: 2, variable: p.candidate_names[1].clone(), threshold: 0.4 }).unwrap()
    }
}
