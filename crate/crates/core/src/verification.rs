//! Reproducible per-platform sampling for human review and the review
//! queue that applies verdicts.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::{Arc, Mutex, MutexGuard};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::model::{LabelClass, LabeledPost, Platform, SocialPost, TaskVerdict, VerificationState, VerificationTask};
use crate::store::{AuditEntry, AuditEvent, Store, StoreError};

pub const DEFAULT_RATE: f64 = 0.10;
pub const LEASE_MINUTES: i64 = 15;

#[derive(Debug, thiserror::Error)]
pub enum SampleError {
    #[error("sampling rate must be in (0, 1], got {0}")]
    RateInvalid(f64),
    #[error("nothing left to sample")]
    NothingToSample,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// xorshift64* generator.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    /// A zero seed would stick at zero, so it is replaced by a fixed constant.
    pub fn new(seed: u64) -> Self {
        Self {
            state: if seed == 0 { 0x9E37_79B9_7F4A_7C15 } else { seed },
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545_F491_4F6C_DD1D)
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

pub fn platform_rng(seed: u64, platform: Platform) -> XorShift64Star {
    XorShift64Star::new(seed ^ fnv1a64(platform.slug().as_bytes()))
}

/// `ceil(rate * n)` computed on the rate rounded to millionths, so that
/// e.g. 0.1 * 30 is exactly 3.
pub fn sample_size(rate: f64, n: usize) -> usize {
    let ppm = (rate * 1_000_000.0).round() as u128;
    (ppm * n as u128).div_ceil(1_000_000) as usize
}

/// Floyd's algorithm: `k` distinct indices from `0..n`, in ascending order.
pub fn floyd_sample(rng: &mut XorShift64Star, n: usize, k: usize) -> Vec<usize> {
    assert!(k <= n);
    let mut chosen = BTreeSet::new();
    for j in (n - k)..n {
        let t = (rng.next_u64() % (j as u64 + 1)) as usize;
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    chosen.into_iter().collect()
}

fn task_id(rng: &mut XorShift64Star) -> String {
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&rng.next_u64().to_le_bytes());
    bytes[8..].copy_from_slice(&rng.next_u64().to_le_bytes());
    uuid::Builder::from_random_bytes(bytes).into_uuid().to_string()
}

/// Samples each platform up to `ceil(rate * n)` reviewed-or-sampled posts,
/// `n` being the platform's labeled posts. On a fresh store that is
/// `ceil(rate * n)` new tasks per platform; rerunning with the same seed adds
/// none. Selection runs over the platform's unverified posts ordered by
/// `(post_uid, news_id)`.
pub fn sample_for_review(
    store: &mut Store,
    rate: f64,
    seed: u64,
    clock: &dyn Clock,
) -> Result<Vec<VerificationTask>, SampleError> {
    if !(rate > 0.0 && rate <= 1.0) {
        return Err(SampleError::RateInvalid(rate));
    }
    let mut by_platform: BTreeMap<Platform, (usize, Vec<&LabeledPost>)> = BTreeMap::new();
    for l in store.labeled_posts() {
        let entry = by_platform.entry(l.platform).or_default();
        if l.verification_state == VerificationState::Unverified {
            entry.1.push(l);
        } else {
            entry.0 += 1;
        }
    }
    let now = clock.now();
    let mut picked = Vec::new();
    for (platform, (reviewed, mut pool)) in by_platform {
        let n = reviewed + pool.len();
        let need = sample_size(rate, n).saturating_sub(reviewed).min(pool.len());
        if need == 0 {
            continue;
        }
        pool.sort_by(|a, b| (&a.post_uid, &a.news_id).cmp(&(&b.post_uid, &b.news_id)));
        let mut rng = platform_rng(seed, platform);
        for i in floyd_sample(&mut rng, pool.len(), need) {
            let l = pool[i];
            picked.push((
                l.clone(),
                VerificationTask {
                    task_id: task_id(&mut rng),
                    platform,
                    post_uid: l.post_uid.clone(),
                    news_id: l.news_id.clone(),
                    sampled_at: now,
                    verdict: TaskVerdict::Pending,
                    reviewer: None,
                    reviewed_at: None,
                    note: String::new(),
                },
            ));
        }
    }
    if picked.is_empty() {
        return Err(SampleError::NothingToSample);
    }
    let mut tasks = Vec::with_capacity(picked.len());
    for (mut labeled, task) in picked {
        labeled.verification_state = VerificationState::Sampled;
        store.upsert(labeled)?;
        store.upsert(task.clone())?;
        tasks.push(task);
    }
    Ok(tasks)
}

#[derive(Debug, thiserror::Error)]
pub enum ReviewError {
    #[error("no task is waiting for review")]
    QueueEmpty,
    #[error("task {0} not found")]
    TaskNotFound(String),
    #[error("task {0} was already decided")]
    AlreadyDecided(String),
    #[error("task {task_id} is leased to {holder}")]
    LeaseHeldByOther { task_id: String, holder: String },
    #[error("verdict must be confirmed or rejected")]
    InvalidVerdict,
    #[error("reviewer id must be non-empty")]
    ReviewerMissing,
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What a reviewer sees for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskPayload {
    pub task: VerificationTask,
    pub post: Option<SocialPost>,
    pub article_title: String,
    pub verdict_raw: String,
    pub label_norm: LabelClass,
    pub source_url: String,
    pub lease_expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pending: usize,
    pub confirmed: usize,
    pub rejected: usize,
}

impl VerdictCounts {
    fn add(&mut self, verdict: TaskVerdict) {
        match verdict {
            TaskVerdict::Pending => self.pending += 1,
            TaskVerdict::Confirmed => self.confirmed += 1,
            TaskVerdict::Rejected => self.rejected += 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewStats {
    pub pending: usize,
    pub confirmed: usize,
    pub rejected: usize,
    pub by_platform: BTreeMap<Platform, VerdictCounts>,
}

pub fn review_stats(store: &Store) -> ReviewStats {
    let mut total = VerdictCounts::default();
    let mut by_platform: BTreeMap<Platform, VerdictCounts> = BTreeMap::new();
    for t in store.tasks() {
        total.add(t.verdict);
        by_platform.entry(t.platform).or_default().add(t.verdict);
    }
    ReviewStats {
        pending: total.pending,
        confirmed: total.confirmed,
        rejected: total.rejected,
        by_platform,
    }
}

struct Lease {
    reviewer: String,
    expires: DateTime<Utc>,
}

struct QueueState {
    store: Store,
    leases: HashMap<String, Lease>,
}

/// Serializes all review operations over one store. Leases live in memory.
pub struct ReviewQueue {
    state: Mutex<QueueState>,
    clock: Arc<dyn Clock>,
}

impl ReviewQueue {
    pub fn new(store: Store, clock: Arc<dyn Clock>) -> Self {
        Self {
            state: Mutex::new(QueueState {
                store,
                leases: HashMap::new(),
            }),
            clock,
        }
    }

    fn lock(&self) -> MutexGuard<'_, QueueState> {
        // A panic mid-request leaves the store consistent on disk, so keep
        // serving rather than poisoning every later request.
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Leases the oldest pending task that nobody holds.
    pub fn next_task(&self, reviewer: &str) -> Result<TaskPayload, ReviewError> {
        if reviewer.trim().is_empty() {
            return Err(ReviewError::ReviewerMissing);
        }
        let now = self.clock.now();
        let mut guard = self.lock();
        let state = &mut *guard;
        state.leases.retain(|_, l| l.expires > now);
        let task = state
            .store
            .tasks()
            .find(|t| t.verdict == TaskVerdict::Pending && !state.leases.contains_key(&t.task_id))
            .cloned()
            .ok_or(ReviewError::QueueEmpty)?;
        let expires = now + Duration::minutes(LEASE_MINUTES);
        state.leases.insert(
            task.task_id.clone(),
            Lease {
                reviewer: reviewer.to_string(),
                expires,
            },
        );
        let store = &state.store;
        let labeled = store.labeled_post(&task.labeled_key());
        let article = store.article(&task.news_id);
        Ok(TaskPayload {
            post: store.post(&task.labeled_key().post).cloned(),
            article_title: article.map(|a| a.title.clone()).unwrap_or_default(),
            verdict_raw: labeled.map(|l| l.label_raw.clone()).unwrap_or_default(),
            label_norm: labeled.map_or(LabelClass::Other, |l| l.label_norm),
            source_url: article.map(|a| a.source_url.clone()).unwrap_or_default(),
            lease_expires_at: expires,
            task,
        })
    }

    /// Records a decision. Confirmed posts stay in the corpus; rejected ones
    /// drop out of every export and report.
    pub fn submit_verdict(
        &self,
        task_id: &str,
        verdict: TaskVerdict,
        reviewer: &str,
        note: &str,
    ) -> Result<VerificationTask, ReviewError> {
        let new_state = match verdict {
            TaskVerdict::Confirmed => VerificationState::Confirmed,
            TaskVerdict::Rejected => VerificationState::Rejected,
            TaskVerdict::Pending => return Err(ReviewError::InvalidVerdict),
        };
        if reviewer.trim().is_empty() {
            return Err(ReviewError::ReviewerMissing);
        }
        let now = self.clock.now();
        let mut guard = self.lock();
        let state = &mut *guard;
        let mut task = state
            .store
            .task(task_id)
            .cloned()
            .ok_or_else(|| ReviewError::TaskNotFound(task_id.to_string()))?;
        if task.verdict != TaskVerdict::Pending {
            return Err(ReviewError::AlreadyDecided(task_id.to_string()));
        }
        if let Some(lease) = state.leases.get(task_id) {
            if lease.expires > now && lease.reviewer != reviewer {
                return Err(ReviewError::LeaseHeldByOther {
                    task_id: task_id.to_string(),
                    holder: lease.reviewer.clone(),
                });
            }
        }
        task.verdict = verdict;
        task.reviewer = Some(reviewer.to_string());
        task.reviewed_at = Some(now);
        task.note = note.to_string();
        if let Some(labeled) = state.store.labeled_post(&task.labeled_key()) {
            let mut labeled = labeled.clone();
            labeled.verification_state = new_state;
            state.store.upsert(labeled)?;
        }
        state.store.upsert(task.clone())?;
        state.store.append_audit(AuditEntry {
            at: now,
            event: AuditEvent::Verdict {
                task_id: task.task_id.clone(),
                platform: task.platform,
                post_uid: task.post_uid.clone(),
                news_id: task.news_id.clone(),
                verdict,
                reviewer: reviewer.to_string(),
                note: note.to_string(),
            },
        })?;
        state.leases.remove(task_id);
        Ok(task)
    }

    pub fn stats(&self) -> ReviewStats {
        review_stats(&self.lock().store)
    }

    /// Runs `f` against the store under the queue lock.
    pub fn with_store<T>(&self, f: impl FnOnce(&Store) -> T) -> T {
        f(&self.lock().store)
    }

    pub fn into_store(self) -> Store {
        self.state.into_inner().unwrap_or_else(|e| e.into_inner()).store
    }
}
