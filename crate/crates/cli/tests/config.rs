use proptest::prelude::*;
use tb_cli::config::{ExperimentKind, RunConfig};
use tb_core::harness::ExperimentConfig;
use tb_core::policies::PolicyKind;
use tb_core::testbed::TestFunction;

const MINIMAL: &str =
    "[function]\nname = \"branin\"\n[policy]\nkind = \"tts\"\n[schedule]\nhorizon = 100\n";

#[test]
fn minimal_config_matches_core_defaults() {
    let cfg = RunConfig::parse(MINIMAL).unwrap();
    assert_eq!(cfg.kind, ExperimentKind::Bo);
    assert_eq!(cfg.parallel, 1);
    assert_eq!(cfg.output_dir, None);
    let exp = cfg.experiment(0);
    assert_eq!(
        exp,
        ExperimentConfig::new(TestFunction::Branin, PolicyKind::BatchedTs, 100, 0)
    );
    assert!(exp.routing && exp.elimination);
    assert_eq!((exp.growth, exp.initial_batch), (1.1, 3));
}

#[test]
fn bogus_function_lists_allowed_names() {
    let msg = RunConfig::parse(&MINIMAL.replace("branin", "bogus"))
        .unwrap_err()
        .to_string();
    assert!(msg.contains("function.name"), "{msg}");
    for f in TestFunction::ALL {
        assert!(msg.contains(f.name()), "{msg} lacks {}", f.name());
    }
}

#[test]
fn every_error_names_its_key() {
    let cases = [
        (
            MINIMAL.replace("kind = \"tts\"", "kind = \"tts\"\nbeta = true"),
            "policy.beta",
        ),
        (
            MINIMAL.replace("kind = \"tts\"", "kind = \"greedy\""),
            "policy.kind",
        ),
        (MINIMAL.replace("kind = \"tts\"", ""), "policy.kind"),
        (
            format!("{MINIMAL}[noise]\nreading = \"sd\"\n"),
            "noise.reading",
        ),
        (
            format!("{MINIMAL}[noise]\nlevel = 0.1\nlevle = 0.2\n"),
            "noise.levle",
        ),
        (
            format!("{MINIMAL}[surrogate]\nkernel = \"matern72\"\n"),
            "surrogate.kernel",
        ),
        (
            format!("{MINIMAL}[output]\ndirectory = \"x\"\n"),
            "output.directory",
        ),
        (
            format!("[experiment]\nseeds = []\n{MINIMAL}"),
            "experiment.seeds",
        ),
        (
            format!("[experiment]\nkind = \"bo\"\nparallel = 0\n{MINIMAL}"),
            "experiment.parallel",
        ),
        (
            MINIMAL.replace(
                "name = \"branin\"",
                "name = \"branin\"\ninitial = [20.0, 1.0]",
            ),
            "function.initial",
        ),
        (format!("{MINIMAL}[arms]\nmeans = [1.0, 0.0]\n"), "arms"),
    ];
    for (text, key) in cases {
        let msg = RunConfig::parse(&text).unwrap_err().to_string();
        assert!(msg.contains(key), "expected `{key}` in: {msg}");
    }
}

#[test]
fn comments_and_other_kinds_parse() {
    let mab = "# arms\n[experiment]\nkind = \"mab\"\nseeds = [3, 4]\n[schedule]\nhorizon = 200 # steps\n[arms]\nmeans = [1.0, 0.9, 0.5]\n";
    let cfg = RunConfig::parse(mab).unwrap();
    assert_eq!(cfg.seeds, vec![3, 4]);
    assert_eq!(cfg.arms.as_ref().unwrap().delta, 0.05);

    let lip = "[experiment]\nkind = \"lipschitz\"\n[schedule]\nhorizon = 300\n[lipschitz]\nobjective = \"quadratic\"\ndim = 2\ncenter = [0.2, 0.7]\n";
    assert_eq!(RunConfig::parse(lip).unwrap().lipschitz.unwrap().dim, 2);

    let scaling =
        "[experiment]\nkind = \"scaling\"\nreplications = 3\n[scaling]\ndim = 3\nn = [16, 32]\n";
    let cfg = RunConfig::parse(scaling).unwrap();
    assert_eq!(cfg.seeds, vec![0, 1, 2]);
    assert!(cfg.schedule.is_none());
    assert!(RunConfig::parse(&format!("{scaling}[schedule]\nhorizon = 5\n")).is_err());
}

fn arb_bo_text() -> impl Strategy<Value = String> {
    let funcs: Vec<&'static str> = TestFunction::ALL.iter().map(|f| f.name()).collect();
    let policies: Vec<&'static str> = PolicyKind::ALL.iter().map(|k| k.name()).collect();
    (
        (prop::sample::select(funcs), prop::sample::select(policies), 2usize..5000, 1.01f64..3.0, 1usize..20),
        (prop::collection::vec(0u64..1000, 1..6), 1usize..8, prop::option::of(0.0f64..1.0)),
        (
            prop::sample::select(vec!["rbf", "matern12", "matern32", "matern52"]),
            prop::option::of(0.01f64..2.0),
            prop::option::of(any::<bool>()),
            0.0f64..10.0,
            prop::sample::select(vec!["std_dev", "variance"]),
            prop::sample::select(vec!["uniform", "low_discrepancy"]),
        ),
    )
        .prop_map(|((f, p, t, c, b1), (seeds, par, level), (kernel, ls, routing, beta, reading, grid))| {
            let mut s = format!(
                "[experiment]\nseeds = {seeds:?}\nparallel = {par}\n[function]\nname = \"{f}\"\ngrid = \"{grid}\"\n\
                 [policy]\nkind = \"{p}\"\nbeta = {beta:?}\n"
            );
            if let Some(r) = routing {
                s.push_str(&format!("routing = {r}\n"));
            }
            s.push_str(&format!("[schedule]\nhorizon = {t}\ngrowth = {c:?}\ninitial_batch = {b1}\n"));
            s.push_str(&format!("[noise]\nreading = \"{reading}\"\n"));
            if let Some(l) = level {
                s.push_str(&format!("level = {l:?}\n"));
            }
            s.push_str(&format!("[surrogate]\nkernel = \"{kernel}\"\nstandardize = {}\n", beta < 5.0));
            if let Some(l) = ls {
                s.push_str(&format!("lengthscale = {l:?}\n"));
            }
            s
        })
}

proptest! {
    #[test]
    fn serialized_configs_reparse_equal(text in arb_bo_text()) {
        let cfg = RunConfig::parse(&text).unwrap();
        let again = RunConfig::parse(&cfg.to_toml()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_toml(), cfg.to_toml());
    }
}

#[test]
fn non_bo_configs_round_trip() {
    let texts = [
        "[experiment]\nkind = \"mab\"\n[schedule]\nhorizon = 60\n[arms]\nmeans = [1, 0.25]\nnoise_std = 0.5\n[output]\ndir = \"res\"\n",
        "[experiment]\nkind = \"lipschitz\"\n[schedule]\nhorizon = 300\n[lipschitz]\nobjective = \"constant\"\nvalue = 2.5\nlipschitz = 1.5\n",
        "[experiment]\nkind = \"scaling\"\nseeds = [5]\n[scaling]\nn = [10, 20, 40]\n",
    ];
    for t in texts {
        let cfg = RunConfig::parse(t).unwrap();
        assert_eq!(RunConfig::parse(&cfg.to_toml()).unwrap(), cfg);
    }
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        RunConfig::from_file(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        count += 1;
    }
    assert!(count >= 3);
}
