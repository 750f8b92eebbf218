use super::*;
use crate::projection::PriorTag;
use crate::qd::Algorithm;

const MINIMAL: &str = r#"
[run]
prior = "contact"
algorithm = "ME_scs"

[mesh]
path = "sphere.obj"

[gripper]
preset = "panda"
"#;

fn key_of(e: Error) -> String {
    match e {
        Error::Config { key, .. } => key,
        other => panic!("expected a config error, got {other}"),
    }
}

#[test]
fn minimal_config_fills_defaults() {
    let c = RunConfig::from_toml(MINIMAL, &[], Some(Path::new("/data"))).unwrap();
    assert_eq!(c.run.prior, PriorTag::Contact);
    assert_eq!(c.run.algorithm, Algorithm::MeScs);
    assert_eq!(c.run.seeds, vec![0, 1, 2, 3, 4]);
    assert_eq!(c.qd.population, 500);
    assert_eq!(c.mesh.path, PathBuf::from("/data/sphere.obj"));
    assert_eq!(c.default_name(), "sphere_contact_ME_scs");
}

#[test]
fn resolved_config_round_trips() {
    let c = RunConfig::from_toml(MINIMAL, &["qd.budget=123".into(), "physics.friction=0.7".into()], None).unwrap();
    let again = RunConfig::from_toml(&c.to_toml(), &[], None).unwrap();
    assert_eq!(c, again);
    let json = serde_json::to_string(&c).unwrap();
    assert_eq!(serde_json::from_str::<RunConfig>(&json).unwrap(), c);

    let mut inline = c.clone();
    inline.gripper = GripperChoice::Inline(GripperSpec::preset("allegro4").unwrap());
    let back = RunConfig::from_toml(&inline.to_toml(), &[], None).unwrap();
    assert_eq!(back, inline);
}

#[test]
fn overrides_replace_keys() {
    let c = RunConfig::from_toml(
        MINIMAL,
        &[
            "qd.budget = 77".into(),
            "run.seeds=[3, 9]".into(),
            "run.algorithm=random".into(),
            "gripper.preset=barrett3".into(),
        ],
        None,
    )
    .unwrap();
    assert_eq!(c.qd.budget, 77);
    assert_eq!(c.run.seeds, vec![3, 9]);
    assert_eq!(c.run.algorithm, Algorithm::Random);
    assert_eq!(c.gripper.resolve().unwrap().name, "barrett3");
}

#[test]
fn errors_name_the_offending_key() {
    let err = |ov: &str| key_of(RunConfig::from_toml(MINIMAL, &[ov.into()], None).unwrap_err());
    assert_eq!(err("qd.budgett=3"), "qd.budgett");
    assert_eq!(err("qd.sigma=-1"), "qd.sigma");
    assert_eq!(err("physics.friction=0"), "physics.friction");
    assert_eq!(err("mdr.trials=0"), "mdr.trials");
    assert_eq!(err("mesh.scale=0"), "mesh.scale");
    assert_eq!(err("run.seeds=[]"), "run.seeds");
    assert_eq!(err("gripper.preset=robotiq"), "gripper.preset");
    assert_eq!(err("gripper.max_aperture=0.1"), "gripper.max_aperture");
    assert_eq!(err("extra.key=1"), "extra");
    assert_eq!(err("run.prior=sideways"), "run.prior");
    assert_eq!(err("qd.budget=-1"), "qd.budget");
    let missing = RunConfig::from_toml("[run]\nprior = \"contact\"\nalgorithm = \"random\"\n", &[], None);
    assert_eq!(key_of(missing.unwrap_err()), "mesh");
}

#[test]
fn antipodal_requires_parallel_jaw() {
    let e = RunConfig::from_toml(
        MINIMAL,
        &["run.prior=antipodal".into(), "gripper.preset=allegro4".into()],
        None,
    )
    .unwrap_err();
    assert_eq!(key_of(e), "run.prior");
    assert!(RunConfig::from_toml(MINIMAL, &["run.prior=antipodal".into()], None).is_ok());
}

#[test]
fn output_dir_precedence() {
    let mut c = RunConfig::from_toml(MINIMAL, &[], None).unwrap();
    c.run.output_dir = Some(PathBuf::from("/tmp/explicit"));
    assert_eq!(c.output_dir(), PathBuf::from("/tmp/explicit"));
    c.run.output_dir = None;
    c.run.name = Some("named".into());
    assert!(c.output_dir().ends_with("named"));
}

#[test]
fn median_of_even_and_odd() {
    assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    assert!(median(&[]).is_nan());
}
