//! Command bodies. Each fills a [`Report`] or fails with a classified
//! [`Failure`].

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use matchforge::axioms::{
    builtin_axiom, direct_axiom, matching_axiom_library, parse_axiom_list, satisfies_punctual, AxiomName, Extended,
    IndividualRationality, MatchingAxiom,
};
use matchforge::choice::{build_rule, ChoiceProperty, ChoiceRule, RuleKind, SharedRule, Tabulated};
use matchforge::engine::{
    check_rule_axioms, check_strategy_proofness, is_stable, run_da, strengthening_counterexample,
    verify_characterization, verify_forward, verify_lemma_chain, Characterization, DaRule, ImmediateAcceptance,
    MatchingRule, StabilityViolation,
};
use matchforge::generate::{generate, GenConfig};
use matchforge::instance::{load_instance, save_instance};
use matchforge::{display_set, ContractId, ContractSet, Guards, InstitutionId, Market, Matching, Problem, Report as R};

use crate::report::{Check, Failure, Report};
use crate::{ChainArgs, CharacterizationArgs, CheckChoiceArgs, CheckMatchingArgs, CheckRuleArgs, GenArgs, MarketArgs, RunArgs};

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Instance(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Problem, Failure> {
    load_instance(&read(path)?).map_err(|e| Failure::Instance(format!("{}: {e}", path.display())))
}

fn parse_shape(shape: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Instance(format!("shape {shape:?} is not AGENTSxINSTITUTIONS"));
    let (a, i) = shape.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, i.trim().parse().map_err(|_| bad())?))
}

fn market_of(args: &MarketArgs) -> Result<Problem, Failure> {
    match (&args.instance, &args.shape) {
        (Some(path), _) => load(path),
        (None, Some(shape)) => {
            let (agents, institutions) = parse_shape(shape)?;
            Ok(generate(&GenConfig::new(agents, institutions, args.types, args.seed))?)
        }
        (None, None) => Err(Failure::Instance("one of --instance or --shape is required".to_owned())),
    }
}

fn institutions(market: &Market, only: Option<&str>) -> Result<Vec<InstitutionId>, Failure> {
    match only {
        None => Ok(market.institutions().collect()),
        Some(name) => market
            .institution_by_name(name)
            .map(|i| vec![i])
            .ok_or_else(|| Failure::Instance(format!("unknown institution {name:?}"))),
    }
}

/// `KIND` for every institution, or `name=KIND,...` with an optional bare
/// default; unlisted institutions use the default, itself defaulting to
/// responsive.
fn rule_kinds(market: &Market, spec: &str) -> Result<Vec<RuleKind>, Failure> {
    let mut default = RuleKind::Responsive;
    let mut per = vec![None; market.institution_count()];
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('=') {
            None => default = part.parse()?,
            Some((name, kind)) => {
                let i = market
                    .institution_by_name(name.trim())
                    .ok_or_else(|| Failure::Instance(format!("unknown institution {name:?} in --rule")))?;
                per[i.0] = Some(kind.trim().parse()?);
            }
        }
    }
    Ok(per.into_iter().map(|k| k.unwrap_or(default)).collect())
}

fn rules_for(market: &Market, spec: &str) -> Result<Vec<SharedRule>, Failure> {
    let kinds = rule_kinds(market, spec)?;
    market
        .institutions()
        .map(|i| build_rule(market, i, kinds[i.0]).map_err(Failure::from))
        .collect()
}

fn ids(set: ContractSet) -> Vec<usize> {
    set.iter().map(|c| c.0).collect()
}

fn names(market: &Market, set: ContractSet) -> Vec<String> {
    set.iter().map(|c| market.contract_name(c)).collect()
}

pub fn run(args: &RunArgs, report: &mut Report) -> Result<(), Failure> {
    let p = load(&args.instance)?;
    let rules = rules_for(&p.market, &args.rule)?;
    let trace = run_da(&p.market, &p.profile, &rules)?;
    let m = &p.market;
    if args.trace {
        for s in &trace.steps {
            let _ = writeln!(report.text, "step {}: proposals {}", s.step, display_set(m, s.proposals));
            for (&i, rec) in &s.per_institution {
                let _ = writeln!(
                    report.text,
                    "  {}: considered {} accepted {} rejected {}",
                    m.institution(InstitutionId(i)).name,
                    display_set(m, rec.considered),
                    display_set(m, rec.accepted),
                    display_set(m, rec.rejected)
                );
            }
        }
        report.trace = Some(trace.to_json(m)["trace"].clone());
    }
    let _ = writeln!(report.text, "matching: {}", display_set(m, trace.matching));
    report.matching = Some(ids(trace.matching));
    report.matching_names = Some(names(m, trace.matching));
    Ok(())
}

/// One item of a `--axiom` list for choice rules.
enum ChoiceItem {
    Property(ChoiceProperty),
    Axiom(AxiomName),
}

fn choice_items(list: &str) -> Result<Vec<ChoiceItem>, Failure> {
    let mut out = Vec::new();
    let mut rest = Vec::new();
    for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.parse::<ChoiceProperty>() {
            Ok(p) => out.push(ChoiceItem::Property(p)),
            Err(_) => rest.push(part),
        }
    }
    out.extend(parse_axiom_list(&rest.join(","))?.into_iter().map(ChoiceItem::Axiom));
    if out.is_empty() {
        return Err(Failure::Instance("--axiom names nothing to check".to_owned()));
    }
    Ok(out)
}

fn property_title(p: ChoiceProperty) -> &'static str {
    match p {
        ChoiceProperty::PathIndependence => "path independence",
        ChoiceProperty::SizeMonotonicity => "size monotonicity",
        ChoiceProperty::Substitutability => "substitutability",
        ChoiceProperty::IrrelevanceOfRejected => "irrelevance of rejected contracts",
    }
}

fn property_check(p: ChoiceProperty, rule: &dyn ChoiceRule, g: &Guards) -> Result<Check, Failure> {
    let r = p.check(rule, g)?;
    let mut c = Check::new(p.name(), property_title(p), r.is_pass());
    if let Some(w) = r.witness() {
        c = c.detail(w.to_string()).witness(w);
    }
    Ok(c)
}

pub fn check_choice(args: &CheckChoiceArgs, g: &Guards, report: &mut Report) -> Result<(), Failure> {
    let items = choice_items(&args.axiom)?;
    if let Some(path) = &args.table {
        let table = Tabulated::from_json(&read(path)?)?;
        for item in &items {
            match item {
                ChoiceItem::Property(p) => report.push(property_check(*p, &table, g)?),
                ChoiceItem::Axiom(a) => {
                    return Err(Failure::Instance(format!(
                        "{a} needs institution data; use --instance instead of --table"
                    )))
                }
            }
        }
        return Ok(());
    }
    let path = args.instance.as_deref().expect("clap requires --instance without --table");
    let p = load(path)?;
    let m = &p.market;
    let kinds = rule_kinds(m, &args.rule)?;
    for i in institutions(m, args.institution.as_deref())? {
        let rule = build_rule(m, i, kinds[i.0])?;
        let scope = m.institution(i).name.clone();
        for item in &items {
            let check = match item {
                ChoiceItem::Property(p) => property_check(*p, rule.as_ref(), g)?,
                ChoiceItem::Axiom(a) => {
                    let axiom = builtin_axiom(m, i, *a)?;
                    let r = satisfies_punctual(rule.as_ref(), axiom.as_ref(), g)?;
                    let mut c = Check::new(a.name(), a.title(), r.is_pass());
                    if let Some(w) = r.witness() {
                        c = c.detail(w.to_string()).witness(w);
                    }
                    c
                }
            };
            report.push(check.scope(scope.clone()));
        }
    }
    Ok(())
}

fn matching_rule(market: &Market, spec: &str) -> Result<Box<dyn MatchingRule>, Failure> {
    if spec == "immediate-acceptance" {
        return Ok(Box::new(ImmediateAcceptance));
    }
    Ok(Box::new(DaRule::new(rules_for(market, spec)?)))
}

/// The extension of each named axiom at every institution.
fn extended(market: &Market, names: &[AxiomName]) -> Result<Vec<(AxiomName, Extended)>, Failure> {
    names
        .iter()
        .map(|&a| {
            let per: Vec<_> = market
                .institutions()
                .map(|i| builtin_axiom(market, i, a))
                .collect::<Result<_, _>>()?;
            Ok((a, Extended::new(a.name(), per)))
        })
        .collect()
}

pub fn check_rule(args: &CheckRuleArgs, g: &Guards, report: &mut Report) -> Result<(), Failure> {
    let p = market_of(&args.market)?;
    let m = &p.market;
    let rule = matching_rule(m, &args.rule)?;
    let mut sp = false;
    let mut ir = false;
    let mut rest = Vec::new();
    for part in args.axiom.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part {
            "strategy-proofness" => sp = true,
            "individual-rationality" => ir = true,
            other => rest.push(other),
        }
    }
    let named = parse_axiom_list(&rest.join(","))?;
    if ir {
        let r = check_rule_axioms(m, rule.as_ref(), &[&IndividualRationality], g)?;
        let mut c = Check::new("individual-rationality", "individual rationality", r.is_pass());
        if let Some(w) = r.witness() {
            c = c.witness(w);
        }
        report.push(c);
    }
    for (a, ext) in extended(m, &named)? {
        let r = check_rule_axioms(m, rule.as_ref(), &[&ext], g)?;
        let mut c = Check::new(a.name(), a.title(), r.is_pass());
        if let Some(w) = r.witness() {
            c = c.witness(w);
        }
        report.push(c);
    }
    if sp {
        let r = check_strategy_proofness(rule.as_ref(), m, g)?;
        let mut c = Check::new("strategy-proofness", "strategy-proofness", r.is_pass()).scope(rule.name());
        if let Some(w) = r.witness() {
            c = c
                .detail(format!(
                    "agent {} gains by reporting {:?} instead of {:?}",
                    m.agent_name(matchforge::AgentId(w.agent)),
                    w.reported_order,
                    w.truthful_order
                ))
                .witness(w);
        }
        report.push(c);
    }
    if report.checks.is_empty() {
        return Err(Failure::Instance("--axiom names nothing to check".to_owned()));
    }
    Ok(())
}

fn parse_matching(market: &Market, raw: &str) -> Result<ContractSet, Failure> {
    let mut set = ContractSet::EMPTY;
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let id: usize = part
            .parse()
            .map_err(|_| Failure::Instance(format!("--matching: {part:?} is not a contract id")))?;
        if id >= market.contracts().len() {
            return Err(Failure::Instance(format!("--matching: no contract {id}")));
        }
        set.insert(ContractId(id));
    }
    Ok(Matching::new(market, set)?.set())
}

pub fn check_matching(args: &CheckMatchingArgs, report: &mut Report) -> Result<(), Failure> {
    let p = load(&args.instance)?;
    let m = &p.market;
    let x = parse_matching(m, &args.matching)?;
    let mut stability = args.axiom.is_none();
    let mut axioms: Vec<Box<dyn MatchingAxiom>> = Vec::new();
    match &args.axiom {
        None => axioms = matching_axiom_library(m),
        Some(list) => {
            let mut rest = Vec::new();
            for part in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                match part {
                    "stability" => stability = true,
                    "individual-rationality" => axioms.push(Box::new(IndividualRationality)),
                    other => rest.push(other),
                }
            }
            for a in parse_axiom_list(&rest.join(","))? {
                axioms.push(Box::new(direct_axiom(m, a)?));
            }
        }
    }
    report.matching = Some(ids(x));
    report.matching_names = Some(names(m, x));
    let _ = writeln!(report.text, "matching: {}", display_set(m, x));
    if stability {
        let rules = rules_for(m, &args.rule)?;
        let r = is_stable(m, &p.profile, &rules, x)?;
        let mut c = Check::new("stability", "stability", r.is_pass());
        if let Some(w) = r.witness() {
            let detail = match w {
                StabilityViolation::IndividualRationality { contract } => {
                    format!("{} is unacceptable", m.contract_name(*contract))
                }
                StabilityViolation::InstitutionalRationality { institution, .. } => {
                    format!("{} would drop part of its assignment", m.institution(InstitutionId(*institution)).name)
                }
                StabilityViolation::Blocking { contract, .. } => format!("{} blocks", m.contract_name(*contract)),
            };
            c = c.detail(detail).witness(w);
        }
        report.push(c);
    }
    for a in &axioms {
        let w = a.check(&p, x);
        let title = a
            .name()
            .parse::<AxiomName>()
            .map(|n| n.title().to_owned())
            .unwrap_or_else(|_| a.name().replace('-', " "));
        let mut c = Check::new(a.name(), title, w.is_none());
        if let Some(w) = w {
            let contracts: Vec<String> = w.contracts.iter().map(|&c| m.contract_name(c)).collect();
            c = c.detail(format!("contracts {}", contracts.join(", "))).witness(w);
        }
        report.push(c);
    }
    Ok(())
}

fn characterization_check(v: &Characterization, scope: &str) -> Check {
    let outcome = match v {
        Characterization::Characterized => "characterized",
        Characterization::Incompatible { .. } => "incompatible",
        Characterization::NotUnique { .. } => "not-unique",
        Characterization::Mismatch { .. } => "mismatch",
    };
    let mut c = Check::new("characterization", "pointwise characterization", v.is_characterized())
        .scope(scope)
        .outcome(outcome);
    if !v.is_characterized() {
        c = c.witness(v);
        c.incompatible = matches!(v, Characterization::Incompatible { .. });
    }
    c
}

pub fn characterization(args: &CharacterizationArgs, g: &Guards, report: &mut Report) -> Result<(), Failure> {
    let p = market_of(&args.market)?;
    let m = &p.market;
    let names = parse_axiom_list(&args.axioms)?;
    if names.is_empty() {
        return Err(Failure::Instance("--axioms names no axiom".to_owned()));
    }
    let target: RuleKind = args.target.parse()?;
    for i in institutions(m, args.institution.as_deref())? {
        let axioms = names
            .iter()
            .map(|&a| builtin_axiom(m, i, a))
            .collect::<Result<Vec<_>, _>>()?;
        let rule = build_rule(m, i, target)?;
        let v = verify_characterization(&axioms, rule.as_ref(), g)?;
        report.push(characterization_check(&v, &m.institution(i).name));
    }
    Ok(())
}

pub fn forward(args: &ChainArgs, g: &Guards, report: &mut Report) -> Result<(), Failure> {
    let p = market_of(&args.market)?;
    let kind: RuleKind = args.rule.parse()?;
    let r = verify_forward(&p.market, kind, g)?;
    let mut c = Check::new("forward", "individual rationality, extended axioms and strategy-proofness", r.is_pass())
        .scope(kind.name());
    if let R::Fail(w) = r {
        c = c.witness(w);
    }
    report.push(c);
    Ok(())
}

pub fn lemma_chain(args: &ChainArgs, g: &Guards, report: &mut Report) -> Result<(), Failure> {
    let p = market_of(&args.market)?;
    let kind: RuleKind = args.rule.parse()?;
    let r = verify_lemma_chain(&p.market, kind, g)?;
    let mut c = Check::new("lemma-chain", "extended axioms imply stability", r.is_pass()).scope(kind.name());
    if let R::Fail(w) = r {
        c = c.witness(w);
    }
    report.push(c);
    Ok(())
}

pub fn strengthening(g: &Guards, report: &mut Report) -> Result<(), Failure> {
    for a in strengthening_counterexample(g)? {
        report.push(Check::new(a.name, a.name.replace('-', " "), a.holds).detail(a.detail));
    }
    Ok(())
}

pub fn gen(args: &GenArgs) -> Result<(), Failure> {
    let mut config = GenConfig::new(args.agents, args.institutions, args.types, args.seed);
    config.capacity = args.capacity;
    config.returning_percent = args.returning_percent;
    let bytes = save_instance(&generate(&config)?);
    match &args.output {
        Some(path) => fs::write(path, &bytes).map_err(|e| Failure::Internal(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Failure::Internal(format!("stdout: {e}")))
        }
    }
}
