mod common;

use common::{program, reqs, run, tests, FIXTURE_TRIPLES};
use intentcov::matcher::oracle_evaluate;
use intentcov::suite::run_suite;

#[test]
fn online_verdicts_match_the_oracle_on_every_fixture() {
    for (p, r, t) in FIXTURE_TRIPLES {
        let m = program(p);
        let set = reqs(r, &m);
        for run in run_suite(&m, &set, &tests(t), true).unwrap() {
            let want = oracle_evaluate(&m, run.trace.as_ref().unwrap(), &set);
            let got: Vec<(String, bool)> = run.reports.iter().map(|r| (r.name.clone(), r.satisfied)).collect();
            let want: Vec<(String, bool)> = want.into_iter().map(|v| (v.name, v.satisfied)).collect();
            assert_eq!(got, want, "{p} {t} {}", run.name);
        }
    }
}

#[test]
fn recording_a_trace_does_not_change_verdicts() {
    for (p, r, t) in FIXTURE_TRIPLES {
        let (_, plain) = run(p, r, t, false);
        let (_, traced) = run(p, r, t, true);
        for (a, b) in plain.iter().zip(&traced) {
            assert_eq!(a.reports, b.reports, "{p} {}", a.name);
            assert_eq!(a.result, b.result);
        }
    }
}

#[test]
fn every_fixture_test_has_the_expected_outcome_kind() {
    use intentcov::suite::TestOutcome::*;
    let want = [
        ("terminate/p2.mls", "terminate/t2.ut", vec![Pass, Pass, Pass, Pass]),
        ("terminate/p4.mls", "terminate/t_prime.ut", vec![Pass; 5]),
        ("isprime/p1.mls", "isprime/t1.ut", vec![Pass, Pass, Fail, Fail]),
        ("isprime/p3.mls", "isprime/t1.ut", vec![Pass; 4]),
        ("infotbl/infotbl.mls", "infotbl/suite.ut", vec![Ran, Ran]),
        ("infotbl/infotbl.mls", "infotbl/errors.ut", vec![Pass; 3]),
    ];
    for (p, t, outcomes) in want {
        let r = FIXTURE_TRIPLES.iter().find(|x| x.0 == p && x.2 == t).unwrap().1;
        let (_, runs) = run(p, r, t, false);
        let got: Vec<_> = runs.iter().map(|r| r.outcome).collect();
        assert_eq!(got, outcomes, "{p} {t}");
    }
}
