use super::*;
use crate::agents::FixedScript;
use crate::equilibrium::SolutionConcept;
use crate::game::{GameKind, GameSpec, PayoffParams, WoAConfig};
use crate::protocol::{World, RULES_HEADER};

const RULE: &str = "Coordinate on the equilibrium assigning Stay to Player A.";

fn chicken() -> GameInstance {
    GameSpec::matrix(GameKind::Chicken, PayoffParams::default()).build().unwrap()
}

fn specs(game: &GameInstance, masked: bool) -> [SystemPromptSpec; 2] {
    let t = TemplateSet::default();
    [PlayerId::A, PlayerId::B].map(|p| World::prompt_spec(&t, game, p, SolutionConcept::PureNash, masked).unwrap())
}

#[test]
fn parses_directives() {
    let p = parse_intervention(&format!("RULE: {RULE}"));
    assert_eq!(p.interventions, vec![Intervention::GlobalRule(RULE.into())]);
    assert_eq!(parse_intervention("COMM_ROUNDS: 3").interventions, vec![Intervention::SetCommRounds(3)]);
    assert!(parse_intervention("I think the players are doing fine.").interventions.is_empty());
    let g = parse_intervention("COMM_GRAPH: A->B\nCOMM_GRAPH: none");
    assert_eq!(
        g.interventions,
        vec![Intervention::SetCommGraph(vec![(PlayerId::A, PlayerId::B)]), Intervention::SetCommGraph(vec![])]
    );
}

#[test]
fn unknown_directives_get_diagnostics() {
    let p = parse_intervention("PAYOFF: 10\nCOMM_ROUNDS: lots\nRULE: be nice");
    assert_eq!(p.interventions, vec![Intervention::GlobalRule("be nice".into())]);
    assert_eq!(p.diagnostics.len(), 2);
    assert_eq!(p.diagnostics[0].line, 1);
}

#[test]
fn directive_round_trip() {
    for iv in [
        Intervention::GlobalRule(RULE.into()),
        Intervention::SetCommRounds(2),
        Intervention::SetCommGraph(vec![(PlayerId::B, PlayerId::A)]),
        Intervention::SetCommGraph(vec![]),
    ] {
        assert_eq!(parse_intervention(&iv.directive()).interventions, vec![iv.clone()]);
    }
}

#[test]
fn validation_bounds() {
    let c = MechanismConstraints::default();
    assert_eq!(validate(&Intervention::SetCommRounds(3), &c), Verdict::Accept);
    assert_eq!(
        validate(&Intervention::SetCommRounds(9), &c),
        Verdict::Reject(RejectReason::OutOfBounds { value: 9, min: 0, max: 4 })
    );
    let long = "word ".repeat(60);
    assert!(matches!(validate(&Intervention::GlobalRule(long), &c), Verdict::Reject(RejectReason::TooLong { .. })));
    let no_edits = MechanismConstraints { graph_edits_allowed: false, ..c.clone() };
    assert!(!validate(&Intervention::SetCommGraph(vec![]), &no_edits).accepted());
    assert!(!validate(&Intervention::SetCommGraph(vec![(PlayerId::A, PlayerId::A)]), &c).accepted());
}

#[test]
fn rule_budget() {
    let c = MechanismConstraints { max_rules_per_run: 1, ..Default::default() };
    let mut s = MechanismState::new();
    assert!(s.admit(&Intervention::GlobalRule("one".into()), &c).accepted());
    assert_eq!(s.admit(&Intervention::GlobalRule("two".into()), &c), Verdict::Reject(RejectReason::TooManyRules { max: 1 }));
}

#[test]
fn rule_applied_once_in_every_prompt() {
    let game = chicken();
    let [mut a, mut b] = specs(&game, false);
    let before = [build_system_prompt(&a), build_system_prompt(&b)];
    let mut comm = CommConfig::with_rounds(2, 1);
    let mut s = MechanismState::new();
    let iv = parse_intervention(&format!("RULE: {RULE}")).interventions.remove(0);
    assert!(s.admit(&iv, &MechanismConstraints::default()).accepted());
    assert!(s.apply(&iv, &mut comm, &mut [&mut a, &mut b]).unwrap());
    assert!(!s.apply(&iv, &mut comm, &mut [&mut a, &mut b]).unwrap());
    for (spec, old) in [&a, &b].iter().zip(&before) {
        let out = build_system_prompt(spec);
        assert_eq!(out.matches(RULE).count(), 1);
        // Only a trailing rules section was added.
        let (head, tail) = out.split_at(old.len());
        assert_eq!(head, old);
        assert!(tail.starts_with(&format!("\n\n{RULES_HEADER}")));
    }
}

#[test]
fn unvalidated_interventions_rejected() {
    let game = chicken();
    let [mut a, mut b] = specs(&game, false);
    let mut comm = CommConfig::with_rounds(2, 1);
    let before = (comm.clone(), a.clone());
    let mut s = MechanismState::new();
    let err = s.apply(&Intervention::SetCommRounds(0), &mut comm, &mut [&mut a, &mut b]).unwrap_err();
    assert!(matches!(err, MechanismError::NotValidated(_)));
    assert_eq!((comm, a), before);
}

#[test]
fn designer_context_structure() {
    let game = chicken();
    let [a, _] = specs(&game, true);
    let mut wa = ContextWindow::new();
    let mut wb = ContextWindow::new();
    let at = Cursor::new(1, 1);
    wa.push(Stage::System, Author::Environment, "secret system prompt", false, at);
    wa.push(Stage::Action, Author::Player(PlayerId::A), "ACTION: Stay", true, at);
    wb.push(Stage::Reflection, Author::Environment, "OUTCOME: iteration=1; you=Swerve; opponent=Stay; payoff=1", false, at);
    let ctx = build_designer_context(
        &[(PlayerId::A, &wa), (PlayerId::B, &wb)],
        &a,
        &game,
        &MechanismConstraints::default(),
        &TemplateSet::default(),
        1,
    )
    .unwrap();
    let sys = &ctx.segments()[0].text;
    assert!(sys.contains("mechanism designer"));
    assert!(!sys.contains("You are Player A"));
    assert!(!sys.contains("Payoff table"));
    let digest = &ctx.segments()[1].text;
    assert_eq!(digest.matches("### Transcript of").count(), 2);
    assert!(!digest.contains("secret"));
    assert!(digest.contains("payoff=hidden"));
}

#[test]
fn attrition_valuations_stay_private() {
    let game = GameSpec::Attrition(WoAConfig { values: [5.0, 7.0], ..WoAConfig::classic(5.0, 2.0, 0.5, 30) }).build().unwrap();
    let [a, _] = specs(&game, false);
    assert!(build_system_prompt(&a).contains("Your prize for winning is 5."));
    let ctx = build_designer_context(&[], &a, &game, &MechanismConstraints::default(), &TemplateSet::default(), 1).unwrap();
    assert!(!ctx.render().contains("prize for winning is"));
}

#[test]
fn designer_round_with_fixed_script() {
    let game = chicken();
    let [mut a, mut b] = specs(&game, false);
    let spec = a.clone();
    let mut comm = CommConfig::with_rounds(2, 2);
    let mut state = MechanismState::new();
    let mut designer = FixedScript::new(vec!["COMM_ROUNDS: 0\nCOMM_ROUNDS: 9\nRULE: Swerve if unsure.".into()]);
    let w = ContextWindow::new();
    let round = designer_round(
        &mut designer,
        &mut state,
        &[(PlayerId::A, &w)],
        &spec,
        &game,
        &MechanismConstraints::default(),
        &TemplateSet::default(),
        1,
        &mut comm,
        &mut [&mut a, &mut b],
    )
    .unwrap();
    assert_eq!(round.entries.iter().map(|e| e.applied).collect::<Vec<_>>(), [true, false, true]);
    assert_eq!(comm.rounds, 0);
    assert_eq!(b.mechanism_rules, vec!["Swerve if unsure.".to_string()]);
    assert_eq!(state.log.len(), 3);
}
