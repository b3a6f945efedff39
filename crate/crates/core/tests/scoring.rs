//! Scoring rules against independent reimplementations, plus ledger-level
//! behaviour: adjudication modes, mode overrides and easy flags.

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use vnn_harness::scoring::{
    adjudicate, benchmark_percent, round_half_away, score, time_bonus, AdjudicationMode, Label, OverheadMode,
    RunRecord, ScoreOptions, TIE_WINDOW, TRIVIAL_BENCHMARK,
};
use vnn_harness::Status;

fn rec(tool: &str, bench: &str, inst: &str, status: Status, secs: f64, mode: &str) -> RunRecord {
    RunRecord {
        tool: tool.into(),
        instance: inst.into(),
        benchmark: bench.into(),
        status,
        seconds: secs,
        mode: mode.into(),
        witness: None,
    }
}

fn statuses(pairs: &[(&str, Status)]) -> BTreeMap<String, Status> {
    pairs.iter().map(|(t, s)| (t.to_string(), *s)).collect()
}

fn cell<'a>(ledger: &'a vnn_harness::scoring::ScoreLedger, inst: &str, tool: &str) -> &'a vnn_harness::scoring::ToolCell {
    ledger.benchmarks.iter().flat_map(|b| &b.instances).find(|i| i.instance == inst).unwrap().cells.get(tool).unwrap()
}

/// Bonus oracle: group sorted times into chains where each step is within
/// the window (in integer hundredths, so no float comparisons decide it).
fn bonus_oracle(times_centi: &[(String, i64)]) -> BTreeMap<String, i64> {
    let mut sorted = times_centi.to_vec();
    sorted.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let window = (TIE_WINDOW * 100.0).round() as i64;
    let mut out = BTreeMap::new();
    let mut class = 0;
    for i in 0..sorted.len() {
        if i > 0 && sorted[i].1 - sorted[i - 1].1 > window {
            class += 1;
        }
        out.insert(sorted[i].0.clone(), [2, 1].get(class).copied().unwrap_or(0));
    }
    out
}

/// Rounding oracle for values given as integer hundredths.
fn round_oracle(centi: i64) -> String {
    let tenths = (centi.abs() + 5) / 10;
    let sign = if centi < 0 && tenths != 0 { "-" } else { "" };
    format!("{sign}{}.{}", tenths / 10, tenths % 10)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn percentages_are_bounded(sums in prop::collection::btree_map("[a-f]{1,3}", -300i64..300, 1..8)) {
        let (pct, warning) = benchmark_percent(&sums);
        let best = *sums.values().max().unwrap();
        for (t, p) in &pct {
            prop_assert!((0.0..=100.0).contains(p));
            if best > 0 {
                prop_assert_eq!(*p == 100.0, sums[t] == best);
                prop_assert!((p - (100.0 * sums[t] as f64 / best as f64).max(0.0)).abs() < 1e-12);
            } else {
                prop_assert_eq!(*p, 0.0);
            }
        }
        prop_assert_eq!(warning.is_some(), best <= 0);
    }

    #[test]
    fn bonus_matches_chained_classes(times in prop::collection::btree_map("[a-h]", 100i64..2000, 1..8),
                                     ineligible in prop::collection::btree_set("[a-h]", 0..3)) {
        let adjusted: BTreeMap<String, f64> = times.iter().map(|(t, c)| (t.clone(), *c as f64 / 100.0)).collect();
        let eligible: BTreeSet<String> = times.keys().filter(|t| !ineligible.contains(*t)).cloned().collect();
        let got = time_bonus(&adjusted, &eligible);
        let pairs: Vec<(String, i64)> = times.iter().filter(|(t, _)| eligible.contains(*t)).map(|(t, c)| (t.clone(), *c)).collect();
        let want = bonus_oracle(&pairs);
        for t in times.keys() {
            prop_assert_eq!(got[t], want.get(t).copied().unwrap_or(0), "tool {}", t);
        }
    }

    #[test]
    fn rounding_is_half_away_from_zero(centi in -100_000i64..100_000) {
        prop_assert_eq!(round_half_away(centi as f64 / 100.0), round_oracle(centi));
    }
}

#[test]
fn voting_and_odd_one_out_differ_on_split_decisions() {
    let three_two = statuses(&[
        ("a", Status::Holds),
        ("b", Status::Holds),
        ("c", Status::Holds),
        ("d", Status::Violated),
        ("e", Status::Violated),
    ]);
    let voting = adjudicate(&three_two, false, AdjudicationMode::Voting);
    assert_eq!(voting["a"], Label::Correct);
    assert_eq!(voting["d"], Label::Incorrect);
    let odd = adjudicate(&three_two, false, AdjudicationMode::OddOneOut);
    assert!(odd.values().all(|l| *l == Label::Ignored));

    let lone = statuses(&[("a", Status::Holds), ("b", Status::Holds), ("c", Status::Violated), ("d", Status::Timeout)]);
    for mode in [AdjudicationMode::Voting, AdjudicationMode::OddOneOut] {
        let l = adjudicate(&lone, false, mode);
        assert_eq!((l["a"], l["c"], l["d"]), (Label::Correct, Label::Incorrect, Label::Unsolved));
    }

    let tie = statuses(&[("a", Status::Holds), ("b", Status::Violated)]);
    assert!(adjudicate(&tie, false, AdjudicationMode::Voting).values().all(|l| *l == Label::Ignored));
    assert!(adjudicate(&tie, false, AdjudicationMode::OddOneOut).values().all(|l| *l == Label::Ignored));
}

#[test]
fn validated_witness_overrides_the_majority() {
    let o = statuses(&[("a", Status::Holds), ("b", Status::Holds), ("c", Status::Holds), ("d", Status::Violated)]);
    for mode in [AdjudicationMode::Voting, AdjudicationMode::OddOneOut] {
        let l = adjudicate(&o, true, mode);
        assert_eq!((l["a"], l["d"]), (Label::Incorrect, Label::Correct));
    }
}

fn overhead_records() -> Vec<RunRecord> {
    vec![
        rec("eran", TRIVIAL_BENCHMARK, "t0", Status::Violated, 3.7, "cpu"),
        rec("eran", TRIVIAL_BENCHMARK, "t1", Status::Violated, 7.1, "gpu"),
        rec("other", TRIVIAL_BENCHMARK, "t0", Status::Violated, 0.5, "default"),
    ]
}

#[test]
fn overhead_follows_mode_and_overrides() {
    let mut records = overhead_records();
    records.push(rec("eran", "b", "i", Status::Holds, 12.0, "gpu"));
    records.push(rec("other", "b", "i", Status::Holds, 20.0, "default"));
    let opts = ScoreOptions { easy_tool: None, unscored: BTreeSet::new(), ..ScoreOptions::default() };

    let multi = score(&records, &opts).unwrap();
    assert!((cell(&multi, "i", "eran").adjusted - (12.0 - 7.1)).abs() < 1e-12);

    let single = score(&records, &ScoreOptions { overhead: OverheadMode::Single, ..opts.clone() }).unwrap();
    assert!((cell(&single, "i", "eran").adjusted - (12.0 - 3.7)).abs() < 1e-12);

    let mut forced = opts.clone();
    forced.mode_overrides.insert(("eran".into(), "b".into()), "cpu".into());
    let forced = score(&records, &forced).unwrap();
    assert!((cell(&forced, "i", "eran").adjusted - (12.0 - 3.7)).abs() < 1e-12);
    assert!((cell(&forced, "i", "other").adjusted - 19.5).abs() < 1e-12);
}

#[test]
fn easy_flags_and_easy_tool_cap_violated_points() {
    let mut records = overhead_records();
    records.push(rec("eran", "b", "i", Status::Violated, 12.0, "cpu"));
    records.push(rec("other", "b", "i", Status::Violated, 30.0, "default"));
    records.push(rec("eran", "b", "j", Status::Violated, 12.0, "cpu"));

    let hard = ScoreOptions { easy_tool: None, unscored: BTreeSet::new(), ..ScoreOptions::default() };
    let l = score(&records, &hard).unwrap();
    assert_eq!(cell(&l, "i", "eran").points, 10 + 2);
    assert_eq!(cell(&l, "i", "other").points, 10 + 1);

    let mut flagged = hard.clone();
    flagged.easy_flags = Some([("b".to_string(), "i".to_string())].into_iter().collect());
    let l = score(&records, &flagged).unwrap();
    assert_eq!(cell(&l, "i", "eran").points, 1 + 2);
    assert_eq!(cell(&l, "j", "eran").points, 10 + 2);

    // The easy tool's own violated answer marks the instance.
    let by_tool = ScoreOptions { easy_tool: Some("other".into()), ..hard };
    let l = score(&records, &by_tool).unwrap();
    assert_eq!(cell(&l, "i", "eran").points, 1 + 2);
    assert_eq!(cell(&l, "j", "eran").points, 10 + 2);
}

#[test]
fn unscored_benchmarks_are_reported_but_not_summed() {
    let mut records = overhead_records();
    records.push(rec("eran", "x", "i", Status::Holds, 12.0, "cpu"));
    records.push(rec("other", "y", "i", Status::Holds, 12.0, "default"));
    let opts = ScoreOptions { easy_tool: None, unscored: ["y".to_string()].into_iter().collect(), ..ScoreOptions::default() };
    let l = score(&records, &opts).unwrap();
    assert_eq!(l.benchmarks.iter().map(|b| (b.name.as_str(), b.scored)).collect::<Vec<_>>(), [("x", true), ("y", false)]);
    let overall: BTreeMap<&str, f64> = l.overall.iter().map(|(t, p)| (t.as_str(), *p)).collect();
    assert_eq!(overall["eran"], 100.0);
    assert_eq!(overall["other"], 0.0);
}
