//! On-disk formats written by a real run and read back.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};

use poshs::agent::EpisodeLog;
use poshs::harness::output::{parse_rows, read_rows, write_report, write_rows, SUMMARY_FILE};
use poshs::harness::{evaluate, pretrain_occupants, summarize, train, Condition, ExperimentConfig, Phase};
use poshs::occupant::HumanModel;
use poshs::preference::ProfileRecord;
use poshs::records::{read_episode_logs, write_episode_log, AgentSnapshot};

fn small() -> ExperimentConfig {
    let mut c = ExperimentConfig::new(2);
    c.pretrain_episodes = 40;
    c.train_episodes = 8;
    c.test_episodes = 3;
    c.seeds = vec![11];
    c
}

#[test]
fn trained_run_survives_disk() {
    let dir = tempfile::tempdir().unwrap();
    let config = small();
    let config_path = dir.path().join("config.toml");
    std::fs::write(&config_path, config.to_toml().unwrap()).unwrap();
    assert_eq!(ExperimentConfig::load(&config_path).unwrap(), config);

    let occupants = pretrain_occupants(&config, 11).unwrap();
    for model in &occupants {
        let path = dir.path().join(format!("{}.json", model.id));
        model.save(&path).unwrap();
        assert_eq!(&HumanModel::load(&path).unwrap(), model);
    }

    let mut logs: Vec<(u32, EpisodeLog)> = Vec::new();
    let mut sink = |_: Phase, _: Condition, episode: u32, log: &EpisodeLog| {
        logs.push((episode, log.clone()));
        Ok(())
    };
    let (mut trained, mut rows) = train(&config, 11, &occupants, true, &mut sink).unwrap();

    let log_path = dir.path().join("train.jsonl");
    let mut out = BufWriter::new(File::create(&log_path).unwrap());
    for (episode, log) in &logs {
        write_episode_log(&mut out, "io", *episode, log).unwrap();
    }
    out.flush().unwrap();
    drop(out);
    let back = read_episode_logs(BufReader::new(File::open(&log_path).unwrap())).unwrap();
    assert_eq!(back, logs);

    let snap_path = dir.path().join("agent.json");
    AgentSnapshot::capture(&trained.agent, &trained.labels).save(&snap_path).unwrap();
    let (agent, labels) = AgentSnapshot::load(&snap_path).unwrap().restore().unwrap();
    assert_eq!(agent, trained.agent);
    assert_eq!(labels, trained.labels);

    for entry in agent.pool.entries() {
        let line = entry.profile.to_record("H_x").to_line().unwrap();
        let (id, profile) = ProfileRecord::parse_line(&line).unwrap();
        assert_eq!(id, "H_x");
        assert_eq!(profile, entry.profile);
    }

    let mut ignore = |_: Phase, _: Condition, _: u32, _: &EpisodeLog| Ok(());
    let (test, _) = evaluate(&config, 11, &occupants, &mut trained, Condition::Poshs, &mut ignore).unwrap();
    assert_eq!(test.len(), 3);
    rows.extend(test);

    let rows_path = dir.path().join("rows.csv");
    write_rows(&rows_path, &rows).unwrap();
    assert_eq!(read_rows(&rows_path).unwrap(), rows);
    let text = std::fs::read_to_string(&rows_path).unwrap();
    assert_eq!(parse_rows(&text).unwrap(), rows);

    let report = summarize(&config, rows).unwrap();
    let written = write_report(dir.path(), &report).unwrap();
    assert!(written.iter().any(|p| p.ends_with(SUMMARY_FILE)));
}

#[test]
fn baseline_rows_import_from_csv() {
    let header = "experiment_id,seed,phase,condition,episode,occupant,predicted,correct,is_new,pool_size,reward,th_steps,steps,valid_samples,belief_steps,converged";
    let csv = format!("{header}\nlstm,0,test,baseline,0,H_a,,false,false,0,31.5,6.0,80,0,80,false\n");
    let rows = parse_rows(&csv).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].condition, Condition::Baseline);
    assert_eq!(rows[0].predicted, None);
}
