use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::guidelines::{guidelines, Guidelines};
use super::store::{KvStore, Table, WriteBatch};
use super::{
    EvaluatorProfile, NewEvaluator, NewProject, Progress, Project, ServiceError, Submission, TaskAssignment,
    TaskState, TaskView,
};
use crate::corpus::{Annotation, TranslationTriple, TripleSet};

const SEP: char = '\0';

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StoredAnnotation {
    annotation: Annotation,
    is_calibration: bool,
}

fn encode<T: Serialize>(value: &T) -> Vec<u8> {
    serde_json::to_vec(value).expect("record serialises")
}

fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, ServiceError> {
    serde_json::from_slice(bytes).map_err(|e| ServiceError::Storage(format!("undecodable record: {e}")))
}

fn key2(a: &str, b: &str) -> String {
    format!("{a}{SEP}{b}")
}

fn key3(a: &str, b: &str, c: &str) -> String {
    format!("{a}{SEP}{b}{SEP}{c}")
}

fn check_id(kind: &str, id: &str) -> Result<(), ServiceError> {
    if id.is_empty() || id.chars().any(|c| c.is_control() || c == '/') {
        return Err(ServiceError::Validation(format!(
            "{kind} must be non-empty without '/' or control characters, got {id:?}"
        )));
    }
    Ok(())
}

/// Stable id of the (project, evaluator, segment) assignment.
pub fn task_id(project_id: &str, evaluator_id: &str, segment_id: &str) -> String {
    let digest = Sha256::digest(key3(project_id, evaluator_id, segment_id).as_bytes());
    hex::encode(&digest[..16])
}

/// Workflow logic over a [`KvStore`]. Writes to one project are serialised
/// by a per-project lock; reads go straight to the store.
pub struct AnnotationService {
    store: Arc<dyn KvStore>,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
}

impl AnnotationService {
    pub fn new(store: Arc<dyn KvStore>) -> Self {
        AnnotationService {
            store,
            locks: Mutex::new(HashMap::new()),
        }
    }

    fn project_lock(&self, project_id: &str) -> Arc<Mutex<()>> {
        self.locks
            .lock()
            .expect("lock table")
            .entry(project_id.to_string())
            .or_default()
            .clone()
    }

    fn get<T: DeserializeOwned>(&self, table: Table, key: &str) -> Result<Option<T>, ServiceError> {
        self.store.get(table, key)?.map(|b| decode(&b)).transpose()
    }

    pub fn project(&self, project_id: &str) -> Result<Project, ServiceError> {
        self.get(Table::Projects, project_id)?
            .ok_or_else(|| ServiceError::NotFound(format!("project {project_id:?}")))
    }

    fn triple(&self, project_id: &str, segment_id: &str) -> Result<TranslationTriple, ServiceError> {
        self.get(Table::Triples, &key2(project_id, segment_id))?
            .ok_or_else(|| ServiceError::Storage(format!("missing triple {segment_id:?} in {project_id:?}")))
    }

    fn evaluator(&self, project_id: &str, evaluator_id: &str) -> Result<EvaluatorProfile, ServiceError> {
        self.get(Table::Evaluators, &key2(project_id, evaluator_id))?
            .ok_or_else(|| ServiceError::NotFound(format!("evaluator {evaluator_id:?} in project {project_id:?}")))
    }

    pub fn create_project(&self, request: NewProject) -> Result<Project, ServiceError> {
        check_id("project_id", &request.project_id)?;
        request
            .lp
            .validate()
            .map_err(|e| ServiceError::Validation(e.to_string()))?;
        if request.triples.is_empty() {
            return Err(ServiceError::Validation("project corpus is empty".into()));
        }
        if request.min_annotators_per_item == 0 {
            return Err(ServiceError::Validation("min_annotators_per_item must be positive".into()));
        }
        let set = TripleSet::from_triples(request.triples).map_err(|e| ServiceError::Validation(e.to_string()))?;
        if request.calibration_size > set.len() {
            return Err(ServiceError::Validation(format!(
                "calibration_size {} exceeds corpus size {}",
                request.calibration_size,
                set.len()
            )));
        }
        for t in set.iter() {
            check_id("segment_id", &t.segment_id)?;
            if t.lp != request.lp {
                return Err(ServiceError::Validation(format!(
                    "segment {:?} is {}, project is {}",
                    t.segment_id, t.lp, request.lp
                )));
            }
        }
        let mut segment_ids: Vec<String> = set.iter().map(|t| t.segment_id.clone()).collect();
        segment_ids.sort();
        let project = Project {
            project_id: request.project_id,
            lp: request.lp,
            dimension: request.dimension,
            min_annotators_per_item: request.min_annotators_per_item,
            calibration_size: request.calibration_size,
            segment_ids,
        };
        let lock = self.project_lock(&project.project_id);
        let _guard = lock.lock().expect("project lock");
        if self.store.get(Table::Projects, &project.project_id)?.is_some() {
            return Err(ServiceError::Conflict(format!("project {:?} already exists", project.project_id)));
        }
        let mut batch = WriteBatch::new();
        for t in set.iter() {
            batch.put(Table::Triples, key2(&project.project_id, &t.segment_id), encode(t));
        }
        batch.put(Table::Projects, project.project_id.clone(), encode(&project));
        self.store.commit(batch)?;
        Ok(project)
    }

    pub fn register_evaluator(&self, project_id: &str, request: NewEvaluator) -> Result<EvaluatorProfile, ServiceError> {
        check_id("evaluator_id", &request.evaluator_id)?;
        let lock = self.project_lock(project_id);
        let _guard = lock.lock().expect("project lock");
        let project = self.project(project_id)?;
        let key = key2(project_id, &request.evaluator_id);
        if self.store.get(Table::Evaluators, &key)?.is_some() {
            return Err(ServiceError::Conflict(format!(
                "evaluator {:?} already registered",
                request.evaluator_id
            )));
        }
        let profile = EvaluatorProfile {
            evaluator_id: request.evaluator_id,
            calibration_complete: project.calibration_size == 0,
            items_done: 0,
            calibration_done: 0,
        };
        let mut batch = WriteBatch::new();
        batch.put(Table::Evaluators, key, encode(&profile));
        self.store.commit(batch)?;
        Ok(profile)
    }

    pub fn guidelines(&self, project_id: &str) -> Result<Guidelines, ServiceError> {
        Ok(guidelines(self.project(project_id)?.dimension))
    }

    fn evaluator_tasks(&self, project_id: &str, evaluator_id: &str) -> Result<Vec<TaskAssignment>, ServiceError> {
        self.store
            .scan_prefix(Table::Tasks, &format!("{}{SEP}", key2(project_id, evaluator_id)))?
            .iter()
            .map(|(_, v)| decode(v))
            .collect()
    }

    /// Distinct submitters per segment (every segment present).
    fn submitters(&self, project: &Project) -> Result<BTreeMap<String, BTreeSet<String>>, ServiceError> {
        let mut out: BTreeMap<String, BTreeSet<String>> =
            project.segment_ids.iter().map(|s| (s.clone(), BTreeSet::new())).collect();
        for (key, _) in self
            .store
            .scan_prefix(Table::Annotations, &format!("{}{SEP}", project.project_id))?
        {
            let mut parts = key.split(SEP).skip(1);
            if let (Some(seg), Some(eid)) = (parts.next(), parts.next()) {
                out.entry(seg.to_string()).or_default().insert(eid.to_string());
            }
        }
        Ok(out)
    }

    fn view(&self, project: &Project, task: TaskAssignment) -> Result<TaskView, ServiceError> {
        let triple = self.triple(&project.project_id, &task.segment_id)?;
        Ok(TaskView {
            task,
            dimension: project.dimension,
            src: triple.src,
            mt: triple.mt,
        })
    }

    /// Returns the evaluator's open task, or assigns a new one: calibration
    /// items first, then the least-covered segment the evaluator has not
    /// seen (ties broken by segment id). `None` once nothing is left.
    pub fn next_task(&self, project_id: &str, evaluator_id: &str) -> Result<Option<TaskView>, ServiceError> {
        let lock = self.project_lock(project_id);
        let _guard = lock.lock().expect("project lock");
        let project = self.project(project_id)?;
        let profile = self.evaluator(project_id, evaluator_id)?;
        let tasks = self.evaluator_tasks(project_id, evaluator_id)?;
        if let Some(open) = tasks
            .iter()
            .filter(|t| t.state != TaskState::Submitted)
            .min_by(|a, b| (!a.is_calibration, &a.segment_id).cmp(&(!b.is_calibration, &b.segment_id)))
        {
            return self.view(&project, open.clone()).map(Some);
        }
        let seen: BTreeSet<&str> = tasks.iter().map(|t| t.segment_id.as_str()).collect();
        let choice = if !profile.calibration_complete {
            project
                .calibration_ids()
                .iter()
                .find(|s| !seen.contains(s.as_str()))
                .map(|s| (s.clone(), true))
        } else {
            let submitters = self.submitters(&project)?;
            submitters
                .iter()
                .filter(|(seg, _)| !seen.contains(seg.as_str()))
                .min_by(|a, b| (a.1.len(), a.0).cmp(&(b.1.len(), b.0)))
                .map(|(seg, _)| (seg.clone(), false))
        };
        let Some((segment_id, is_calibration)) = choice else {
            return Ok(None);
        };
        let task = TaskAssignment {
            task_id: task_id(project_id, evaluator_id, &segment_id),
            project_id: project_id.to_string(),
            segment_id: segment_id.clone(),
            evaluator_id: evaluator_id.to_string(),
            state: TaskState::Pending,
            is_calibration,
        };
        let task_key = key3(project_id, evaluator_id, &segment_id);
        let mut batch = WriteBatch::new();
        batch.put(Table::Tasks, task_key.clone(), encode(&task));
        batch.put(Table::TaskIndex, task.task_id.clone(), task_key.into_bytes());
        self.store.commit(batch)?;
        self.view(&project, task).map(Some)
    }

    fn locate_task(&self, task_id: &str) -> Result<(String, TaskAssignment), ServiceError> {
        let key = self
            .store
            .get(Table::TaskIndex, task_id)?
            .ok_or_else(|| ServiceError::NotFound(format!("task {task_id:?}")))?;
        let key = String::from_utf8(key).map_err(|_| ServiceError::Storage("bad task index entry".into()))?;
        let task = self
            .get(Table::Tasks, &key)?
            .ok_or_else(|| ServiceError::Storage(format!("dangling task index for {task_id:?}")))?;
        Ok((key, task))
    }

    pub fn task(&self, task_id: &str) -> Result<TaskAssignment, ServiceError> {
        Ok(self.locate_task(task_id)?.1)
    }

    /// Validates and stores an annotation. Nothing is written unless every
    /// check passes.
    pub fn submit(&self, task_id: &str, submission: Submission) -> Result<Annotation, ServiceError> {
        let (_, peek) = self.locate_task(task_id)?;
        let lock = self.project_lock(&peek.project_id);
        let _guard = lock.lock().expect("project lock");
        let (task_key, mut task) = self.locate_task(task_id)?;
        if task.state == TaskState::Submitted {
            return Err(ServiceError::Conflict(format!("task {task_id:?} is already submitted")));
        }
        if !(0..=100).contains(&submission.da_score) {
            return Err(ServiceError::Validation(format!(
                "da_score {} outside [0, 100]",
                submission.da_score
            )));
        }
        let project = self.project(&task.project_id)?;
        let triple = self.triple(&task.project_id, &task.segment_id)?;
        let annotation = Annotation {
            segment_id: task.segment_id.clone(),
            evaluator_id: task.evaluator_id.clone(),
            dimension: project.dimension,
            spans: submission.spans,
            da_score: submission.da_score as u8,
            submitted_at: Utc::now(),
        };
        annotation
            .validate(Some(&triple))
            .map_err(|e| ServiceError::Validation(e.to_string()))?;

        let first_submission = task.state == TaskState::Pending;
        let mut profile = self.evaluator(&task.project_id, &task.evaluator_id)?;
        if first_submission {
            profile.items_done += 1;
            if task.is_calibration {
                profile.calibration_done += 1;
            }
            if profile.calibration_done >= project.calibration_size {
                profile.calibration_complete = true;
            }
        }
        task.state = TaskState::Submitted;
        let mut batch = WriteBatch::new();
        batch.put(
            Table::Annotations,
            key3(&task.project_id, &task.segment_id, &task.evaluator_id),
            encode(&StoredAnnotation {
                annotation: annotation.clone(),
                is_calibration: task.is_calibration,
            }),
        );
        batch.put(Table::Tasks, task_key, encode(&task));
        batch.put(
            Table::Evaluators,
            key2(&task.project_id, &task.evaluator_id),
            encode(&profile),
        );
        self.store.commit(batch)?;
        Ok(annotation)
    }

    /// Lets a submitted annotation be revised; the old one stays exported
    /// until it is replaced.
    pub fn reopen(&self, task_id: &str) -> Result<TaskAssignment, ServiceError> {
        let (_, peek) = self.locate_task(task_id)?;
        let lock = self.project_lock(&peek.project_id);
        let _guard = lock.lock().expect("project lock");
        let (task_key, mut task) = self.locate_task(task_id)?;
        if task.state != TaskState::Submitted {
            return Err(ServiceError::Conflict(format!("task {task_id:?} is not submitted")));
        }
        task.state = TaskState::Reopened;
        let mut batch = WriteBatch::new();
        batch.put(Table::Tasks, task_key, encode(&task));
        self.store.commit(batch)?;
        Ok(task)
    }

    /// Submitted annotations ordered by (segment, evaluator).
    pub fn export(&self, project_id: &str, include_calibration: bool) -> Result<Vec<Annotation>, ServiceError> {
        self.project(project_id)?;
        let mut out = Vec::new();
        for (_, v) in self
            .store
            .scan_prefix(Table::Annotations, &format!("{project_id}{SEP}"))?
        {
            let stored: StoredAnnotation = decode(&v)?;
            if include_calibration || !stored.is_calibration {
                out.push(stored.annotation);
            }
        }
        Ok(out)
    }

    pub fn progress(&self, project_id: &str) -> Result<Progress, ServiceError> {
        let project = self.project(project_id)?;
        let submitters = self.submitters(&project)?;
        let evaluators = self
            .store
            .scan_prefix(Table::Evaluators, &format!("{project_id}{SEP}"))?
            .iter()
            .map(|(_, v)| decode(v))
            .collect::<Result<Vec<EvaluatorProfile>, _>>()?;
        Ok(Progress {
            project_id: project.project_id.clone(),
            segments: project.segment_ids.len(),
            calibration_size: project.calibration_size,
            min_annotators_per_item: project.min_annotators_per_item,
            total_submissions: submitters.values().map(|s| s.len()).sum(),
            segments_covered: submitters
                .values()
                .filter(|s| s.len() >= project.min_annotators_per_item)
                .count(),
            submitters_per_segment: submitters.into_iter().map(|(k, v)| (k, v.len())).collect(),
            evaluators,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Dimension, ErrorCategory, ErrorSpan, LanguagePair, Split, SpanTarget};
    use crate::service::MemoryStore;

    fn lp() -> LanguagePair {
        LanguagePair::new("eng", "yor").unwrap()
    }

    fn triples(ids: &[&str]) -> Vec<TranslationTriple> {
        ids.iter()
            .map(|id| TranslationTriple {
                segment_id: id.to_string(),
                lp: lp(),
                src: format!("source sentence {id}"),
                mt: format!("ìtumọ̀ {id}"),
                reference: None,
                split: Split::Unsplit,
            })
            .collect()
    }

    fn service_with(ids: &[&str], calibration_size: usize, dimension: Dimension) -> (AnnotationService, Arc<MemoryStore>) {
        let store = Arc::new(MemoryStore::new());
        let svc = AnnotationService::new(store.clone());
        svc.create_project(NewProject {
            project_id: "p".into(),
            lp: lp(),
            dimension,
            triples: triples(ids),
            min_annotators_per_item: 2,
            calibration_size,
        })
        .unwrap();
        (svc, store)
    }

    fn register(svc: &AnnotationService, eid: &str) {
        svc.register_evaluator("p", NewEvaluator { evaluator_id: eid.into() }).unwrap();
    }

    fn submit_score(svc: &AnnotationService, task_id: &str, score: i64) -> Result<Annotation, ServiceError> {
        svc.submit(task_id, Submission { spans: vec![], da_score: score })
    }

    #[test]
    fn create_project_validation() {
        let ids: Vec<String> = (0..10).map(|i| format!("s{i}")).collect();
        let refs: Vec<&str> = ids.iter().map(|s| s.as_str()).collect();
        let (svc, _) = service_with(&refs, 2, Dimension::Adequacy);
        assert_eq!(svc.progress("p").unwrap().total_submissions, 0);
        let base = NewProject {
            project_id: "q".into(),
            lp: lp(),
            dimension: Dimension::Adequacy,
            triples: triples(&["a", "b", "c", "d", "e", "f", "g", "h"]),
            min_annotators_per_item: 2,
            calibration_size: 20,
        };
        assert!(matches!(svc.create_project(base.clone()), Err(ServiceError::Validation(_))));
        let zero = NewProject {
            min_annotators_per_item: 0,
            calibration_size: 2,
            ..base.clone()
        };
        assert!(matches!(svc.create_project(zero), Err(ServiceError::Validation(_))));
        let dup = NewProject {
            project_id: "p".into(),
            calibration_size: 2,
            ..base.clone()
        };
        assert!(matches!(svc.create_project(dup), Err(ServiceError::Conflict(_))));
        let empty = NewProject {
            triples: vec![],
            calibration_size: 0,
            ..base
        };
        assert!(matches!(svc.create_project(empty), Err(ServiceError::Validation(_))));
    }

    #[test]
    fn calibration_first_then_least_covered() {
        let (svc, _) = service_with(&["d", "c", "b", "a"], 2, Dimension::Adequacy);
        register(&svc, "e1");
        register(&svc, "e2");
        let t1 = svc.next_task("p", "e1").unwrap().unwrap();
        assert_eq!((t1.task.segment_id.as_str(), t1.task.is_calibration), ("a", true));
        // open task is returned again
        assert_eq!(svc.next_task("p", "e1").unwrap().unwrap().task.task_id, t1.task.task_id);
        submit_score(&svc, &t1.task.task_id, 50).unwrap();
        let t2 = svc.next_task("p", "e1").unwrap().unwrap();
        assert_eq!((t2.task.segment_id.as_str(), t2.task.is_calibration), ("b", true));
        submit_score(&svc, &t2.task.task_id, 60).unwrap();
        let t3 = svc.next_task("p", "e1").unwrap().unwrap();
        assert_eq!((t3.task.segment_id.as_str(), t3.task.is_calibration), ("c", false));
        submit_score(&svc, &t3.task.task_id, 60).unwrap();
        // e2 calibrates on a, b; then d (0 submitters) beats c (1 submitter)
        for expected in ["a", "b", "d", "c"] {
            let t = svc.next_task("p", "e2").unwrap().unwrap();
            assert_eq!(t.task.segment_id, expected);
            submit_score(&svc, &t.task.task_id, 10).unwrap();
        }
        assert!(svc.next_task("p", "e2").unwrap().is_none());
        let p = svc.progress("p").unwrap();
        assert_eq!(p.segments_covered, 3);
        assert!(p.evaluators.iter().all(|e| e.calibration_complete));
    }

    #[test]
    fn tie_break_by_segment_id() {
        let (svc, _) = service_with(&["b", "a"], 0, Dimension::Adequacy);
        register(&svc, "e");
        assert_eq!(svc.next_task("p", "e").unwrap().unwrap().task.segment_id, "a");
    }

    #[test]
    fn submission_rules() {
        let (svc, store) = service_with(&["a", "b"], 0, Dimension::Fluency);
        register(&svc, "e");
        let t = svc.next_task("p", "e").unwrap().unwrap().task;
        let before = store.dump();
        let bad_category = Submission {
            spans: vec![ErrorSpan {
                start: 0,
                end: 3,
                target: SpanTarget::TranslationSide,
                category: ErrorCategory::Omission,
            }],
            da_score: 40,
        };
        assert!(matches!(svc.submit(&t.task_id, bad_category), Err(ServiceError::Validation(_))));
        assert!(matches!(submit_score(&svc, &t.task_id, 101), Err(ServiceError::Validation(_))));
        let out_of_bounds = Submission {
            spans: vec![ErrorSpan {
                start: 0,
                end: 500,
                target: SpanTarget::TranslationSide,
                category: ErrorCategory::Grammar,
            }],
            da_score: 40,
        };
        assert!(matches!(svc.submit(&t.task_id, out_of_bounds), Err(ServiceError::Validation(_))));
        assert_eq!(store.dump(), before);
        submit_score(&svc, &t.task_id, 40).unwrap();
        assert!(matches!(submit_score(&svc, &t.task_id, 40), Err(ServiceError::Conflict(_))));
        assert!(matches!(submit_score(&svc, "nope", 40), Err(ServiceError::NotFound(_))));
    }

    #[test]
    fn reopen_and_resubmit() {
        let (svc, _) = service_with(&["a"], 0, Dimension::Adequacy);
        register(&svc, "e");
        let t = svc.next_task("p", "e").unwrap().unwrap().task;
        submit_score(&svc, &t.task_id, 40).unwrap();
        assert!(svc.next_task("p", "e").unwrap().is_none());
        assert_eq!(svc.reopen(&t.task_id).unwrap().state, TaskState::Reopened);
        assert_eq!(svc.next_task("p", "e").unwrap().unwrap().task.task_id, t.task_id);
        submit_score(&svc, &t.task_id, 70).unwrap();
        let export = svc.export("p", true).unwrap();
        assert_eq!(export.len(), 1);
        assert_eq!(export[0].da_score, 70);
        assert_eq!(svc.progress("p").unwrap().evaluators[0].items_done, 1);
    }

    #[test]
    fn export_excludes_calibration_by_default() {
        let (svc, _) = service_with(&["a", "b", "c"], 1, Dimension::Adequacy);
        assert!(svc.export("p", false).unwrap().is_empty());
        register(&svc, "e");
        for _ in 0..3 {
            let t = svc.next_task("p", "e").unwrap().unwrap();
            submit_score(&svc, &t.task.task_id, 30).unwrap();
        }
        assert_eq!(svc.export("p", false).unwrap().len(), 2);
        assert_eq!(svc.export("p", true).unwrap().len(), 3);
        assert!(matches!(svc.export("zz", false), Err(ServiceError::NotFound(_))));
    }

    #[test]
    fn unknown_evaluator() {
        let (svc, _) = service_with(&["a"], 0, Dimension::Adequacy);
        assert!(matches!(svc.next_task("p", "ghost"), Err(ServiceError::NotFound(_))));
        assert!(matches!(svc.next_task("nope", "ghost"), Err(ServiceError::NotFound(_))));
    }
}
