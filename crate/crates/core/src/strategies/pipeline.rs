use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{Strategy, StrategyConfig};
use super::parallel::ordered_map;
use super::trace::{CallRecord, RunTrace, SelectionRecord, TraceTotals, TRACE_SCHEMA};
use super::vote::{majority_vote, vote_seed};
use super::StrategyError;
use crate::eval::QARecord;
use crate::frames::{
    expand_neighborhood, fixed_windows, merge_context, partition_segments, subsample_to_limit,
    uniform_sample, ContextSet, FrameId, FrameStore,
};
use crate::gateway::{
    embed, CallRole, ChatRequest, EmbedItem, EmbeddingBackend, Gateway, GatewayError, Part,
};
use crate::prompting::{
    caption_request_parts, is_abstention, parse_final_answer, parse_selection_response,
    render_aggregate_prompt, render_answer_prompt, render_caption_selection_prompt,
    render_segment_answer_prompt, render_selection_prompt, AnswerDialect, AnswerOutput,
    CaptionStyle, LocalIdMap, ParsePath, SegmentAnswer, SelectionOutput,
};
use crate::similarity::{top_k_ascending, Scored};

const EMBED_CHUNK: usize = 128;

/// Runs strategies for single questions. Holds no per-question state, so
/// one pipeline can serve many worker threads.
pub struct Pipeline<'a> {
    gateway: &'a Gateway,
    embedder: Option<&'a dyn EmbeddingBackend>,
    model_id: String,
    cfg: StrategyConfig,
    k: u32,
}

/// A selection call and its outcome. Failed calls carry the error and fall
/// back to every presented frame.
struct Selected {
    record: CallRecord,
    output: SelectionOutput,
    error: Option<GatewayError>,
}

/// An answering call: its record plus the parsed answer, or the error.
struct Answered {
    record: CallRecord,
    result: Result<AnswerOutput, GatewayError>,
}

/// Pieces every strategy hands to [`Pipeline::finish`].
struct Outcome {
    calls: Vec<CallRecord>,
    selected: Option<Vec<FrameId>>,
    pool: Option<u32>,
    context: ContextSet,
    answer: AnswerOutput,
    votes: Option<Vec<Option<usize>>>,
}

impl<'a> Pipeline<'a> {
    pub fn new(
        gateway: &'a Gateway,
        model_id: impl Into<String>,
        cfg: StrategyConfig,
    ) -> Result<Self, StrategyError> {
        let k = cfg.validate()?;
        Ok(Self {
            gateway,
            embedder: None,
            model_id: model_id.into(),
            cfg,
            k,
        })
    }

    pub fn with_embedder(mut self, embedder: &'a dyn EmbeddingBackend) -> Self {
        self.embedder = Some(embedder);
        self
    }

    pub fn frame_budget(&self) -> u32 {
        self.k
    }

    pub fn config(&self) -> &StrategyConfig {
        &self.cfg
    }

    pub fn run(
        &self,
        strategy: Strategy,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<RunTrace, StrategyError> {
        if store.video_id() != qa.video_id {
            return Err(StrategyError::VideoMismatch {
                expected: qa.video_id.clone(),
                found: store.video_id().to_string(),
            });
        }
        let outcome = match strategy {
            Strategy::Baseline => self.baseline(store, qa)?,
            Strategy::SingleStep => self.single_step(store, qa)?,
            Strategy::DynamicSegment => self.dynamic_segment(store, qa, None)?,
            Strategy::CaptionSelectConcise | Strategy::CaptionSelectLong => {
                self.dynamic_segment(store, qa, strategy.caption_style())?
            }
            Strategy::Hierarchical => self.hierarchical(store, qa)?,
            Strategy::SelfConsistency => self.self_consistency(store, qa)?,
            Strategy::SimilarityFrames => self.similarity(store, qa, strategy, false)?,
            Strategy::SimilarityCaptions | Strategy::VideoAgent => {
                self.similarity(store, qa, strategy, true)?
            }
            Strategy::IndependentSegments => self.independent_segments(store, qa, false)?,
            Strategy::IndependentSegmentsHc => self.independent_segments(store, qa, true)?,
        };
        Ok(self.finish(strategy, store, qa, outcome))
    }

    pub fn run_baseline(
        &self,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<RunTrace, StrategyError> {
        self.run(Strategy::Baseline, store, qa)
    }

    pub fn run_single_step(
        &self,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<RunTrace, StrategyError> {
        self.run(Strategy::SingleStep, store, qa)
    }

    pub fn run_dynamic_segment(
        &self,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<RunTrace, StrategyError> {
        self.run(Strategy::DynamicSegment, store, qa)
    }

    pub fn run_hierarchical(
        &self,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<RunTrace, StrategyError> {
        self.run(Strategy::Hierarchical, store, qa)
    }

    pub fn run_self_consistency(
        &self,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<RunTrace, StrategyError> {
        self.run(Strategy::SelfConsistency, store, qa)
    }

    fn finish(
        &self,
        strategy: Strategy,
        store: &FrameStore,
        qa: &QARecord,
        o: Outcome,
    ) -> RunTrace {
        RunTrace {
            trace_schema: TRACE_SCHEMA,
            question_id: qa.question_id.clone(),
            video_id: qa.video_id.clone(),
            strategy: strategy.name().to_string(),
            params: self.cfg.clone(),
            frame_count: store.frame_count(),
            totals: TraceTotals::from_calls(&o.calls),
            calls: o.calls,
            selected_ids_initial: o.selected,
            selection_pool_size: o.pool,
            final_context: o.context,
            answer: o.answer,
            votes: o.votes,
            judge: None,
        }
    }

    fn request(&self, qa: &QARecord, role: CallRole, parts: Vec<Part>) -> ChatRequest {
        ChatRequest::new(self.model_id.clone(), role, parts)
            .with_temperature(self.cfg.temperature)
            .with_max_output_tokens(self.cfg.max_output_tokens)
            .for_question(&qa.video_id, &qa.question_id)
    }

    /// Sends one request and records it.
    fn call(
        &self,
        req: &ChatRequest,
        presented: Vec<FrameId>,
        segment: Option<u32>,
    ) -> (CallRecord, Result<String, GatewayError>) {
        match self.gateway.complete(req) {
            Ok(done) => (
                CallRecord::completed(
                    req,
                    &done.response,
                    done.cache_hit,
                    self.cfg.budget.tokens_per_frame,
                    presented,
                    segment,
                ),
                Ok(done.response.text),
            ),
            Err(e) => {
                tracing::warn!(role = req.meta.role.as_str(), ?segment, error = %e, "call failed");
                (
                    CallRecord::failed(req.meta.role, presented, segment, e.to_string()),
                    Err(e),
                )
            }
        }
    }

    fn dialect(&self, qa: &QARecord) -> AnswerDialect {
        if qa.is_mcq() {
            self.cfg.answer_dialect
        } else {
            AnswerDialect::OpenEnded
        }
    }

    fn finish_selection(
        &self,
        record: CallRecord,
        result: Result<String, GatewayError>,
        map_ids: &[FrameId],
        parsed: impl FnOnce(&str) -> SelectionOutput,
    ) -> Selected {
        let (output, error) = match result {
            Ok(text) => (parsed(&text), None),
            Err(e) => (
                SelectionOutput::fallback_all(&LocalIdMap::new(map_ids.to_vec())),
                Some(e),
            ),
        };
        let mut record = record;
        record.selection = Some(SelectionRecord {
            frame_ids: output.frame_ids.clone(),
            justification: output.justification.clone(),
            repaired: output.repaired,
        });
        Selected {
            record,
            output,
            error,
        }
    }

    fn select_frames(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        ids: &[FrameId],
        segment: Option<u32>,
    ) -> Result<Selected, StrategyError> {
        let payloads = store.load_many(ids)?;
        let (parts, map) = render_selection_prompt(&payloads, &qa.question, &qa.options);
        let req = self.request(qa, CallRole::Select, parts);
        let (record, result) = self.call(&req, ids.to_vec(), segment);
        Ok(self.finish_selection(record, result, ids, |text| {
            parse_selection_response(text, &map)
        }))
    }

    fn caption(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        id: FrameId,
        style: CaptionStyle,
        segment: Option<u32>,
    ) -> Result<(CallRecord, String), StrategyError> {
        let payload = store.load(id)?;
        let req = self.request(
            qa,
            CallRole::Caption,
            caption_request_parts(&payload, style),
        );
        let (record, result) = self.call(&req, vec![id], segment);
        let caption = result.unwrap_or_else(|e| {
            tracing::warn!(frame_id = id, error = %e, "caption failed; using an empty caption");
            String::new()
        });
        Ok((record, caption))
    }

    /// Captions every frame, then runs a text-only selection over the
    /// captions. Returns the caption records followed by the selection.
    fn select_from_captions(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        ids: &[FrameId],
        style: CaptionStyle,
        segment: Option<u32>,
    ) -> Result<(Vec<CallRecord>, Selected), StrategyError> {
        let mut records = Vec::with_capacity(ids.len());
        let mut captions = Vec::with_capacity(ids.len());
        for &id in ids {
            let (record, caption) = self.caption(store, qa, id, style, segment)?;
            records.push(record);
            captions.push((id, caption));
        }
        let (parts, map) = render_caption_selection_prompt(&captions, &qa.question, &qa.options);
        let req = self.request(qa, CallRole::Select, parts);
        let (record, result) = self.call(&req, ids.to_vec(), segment);
        let selected = self.finish_selection(record, result, ids, |text| {
            parse_selection_response(text, &map)
        });
        Ok((records, selected))
    }

    fn answer(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        ids: &[FrameId],
        role: CallRole,
        sampling: Option<(f64, u64)>,
        segment: Option<u32>,
    ) -> Result<Answered, StrategyError> {
        if ids.len() > self.k as usize {
            return Err(StrategyError::BudgetViolation {
                presented: ids.len(),
                k: self.k,
            });
        }
        let payloads = store.load_many(ids)?;
        let dialect = self.dialect(qa);
        let mut req = self.request(
            qa,
            role,
            render_answer_prompt(&payloads, &qa.question, &qa.options, dialect),
        );
        if let Some((temperature, seed)) = sampling {
            req = req.with_temperature(temperature).with_seed(seed);
        }
        let (record, result) = self.call(&req, ids.to_vec(), segment);
        Ok(Answered {
            record,
            result: result.map(|text| parse_final_answer(&text, qa.options.len(), dialect)),
        })
    }

    /// Final answer over a context; failures abort the run.
    fn answer_context(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        context: &ContextSet,
        calls: &mut Vec<CallRecord>,
    ) -> Result<AnswerOutput, StrategyError> {
        let answered = self.answer(
            store,
            qa,
            &context.frame_ids(),
            CallRole::Answer,
            None,
            None,
        )?;
        calls.push(answered.record);
        Ok(answered.result?)
    }

    fn baseline(&self, store: &FrameStore, qa: &QARecord) -> Result<Outcome, StrategyError> {
        let context = ContextSet::from_uniform(&uniform_sample(store.frame_count(), self.k));
        let mut calls = Vec::new();
        let answer = self.answer_context(store, qa, &context, &mut calls)?;
        Ok(Outcome {
            calls,
            selected: None,
            pool: None,
            context,
            answer,
            votes: None,
        })
    }

    fn single_step(&self, store: &FrameStore, qa: &QARecord) -> Result<Outcome, StrategyError> {
        let n = store.frame_count();
        let presented = uniform_sample(n, self.k);
        let sel = self.select_frames(store, qa, &presented, None)?;
        if let Some(e) = sel.error {
            return Err(e.into());
        }
        let mut calls = vec![sel.record];
        let context = merge_context(&sel.output.frame_ids, n, self.k, self.cfg.uniform_frames);
        let answer = self.answer_context(store, qa, &context, &mut calls)?;
        Ok(Outcome {
            calls,
            selected: Some(sel.output.frame_ids),
            pool: Some(presented.len() as u32),
            context,
            answer,
            votes: None,
        })
    }

    /// Iterated selection around the previous picks until the selection stops
    /// changing or the iteration cap is reached.
    fn hierarchical(&self, store: &FrameStore, qa: &QARecord) -> Result<Outcome, StrategyError> {
        let n = store.frame_count();
        let mut presented = uniform_sample(n, self.k);
        let mut pool: BTreeSet<FrameId> = BTreeSet::new();
        let mut calls = Vec::new();
        let mut current: Option<Vec<FrameId>> = None;
        for iteration in 0..self.cfg.max_iterations {
            pool.extend(presented.iter().copied());
            let sel = self.select_frames(store, qa, &presented, None)?;
            calls.push(sel.record);
            let fixed_point = current.as_ref() == Some(&sel.output.frame_ids);
            let picked = sel.output.frame_ids;
            if fixed_point {
                tracing::debug!(iteration, "selection reached a fixed point");
                current = Some(picked);
                break;
            }
            presented = subsample_to_limit(
                &expand_neighborhood(&picked, self.cfg.neighborhood_radius, n),
                self.k,
            );
            current = Some(picked);
            if presented.is_empty() {
                break;
            }
        }
        let selected = current.unwrap_or_default();
        let context = merge_context(&selected, n, self.k, self.cfg.uniform_frames);
        let answer = self.answer_context(store, qa, &context, &mut calls)?;
        Ok(Outcome {
            calls,
            selected: Some(selected),
            pool: Some(pool.len() as u32),
            context,
            answer,
            votes: None,
        })
    }

    /// Segment-wise selection. With a caption style, each segment's frames
    /// are captioned and selection runs over the captions.
    fn dynamic_segment(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        captions: Option<CaptionStyle>,
    ) -> Result<Outcome, StrategyError> {
        let n = store.frame_count();
        let segments = partition_segments(n, self.cfg.segments)?;
        let results = ordered_map(segments.len(), self.cfg.parallelism, |i| {
            let seg = &segments[i];
            let ids = seg.sample(self.cfg.frames_per_segment);
            match captions {
                Some(style) => self.select_from_captions(store, qa, &ids, style, Some(seg.index)),
                None => self
                    .select_frames(store, qa, &ids, Some(seg.index))
                    .map(|sel| (Vec::new(), sel)),
            }
        });
        let mut calls = Vec::new();
        let mut selected = Vec::new();
        let mut pool = 0u32;
        for result in results {
            let (caption_calls, sel) = result?;
            calls.extend(caption_calls);
            pool += sel.record.presented.len() as u32;
            calls.push(sel.record);
            selected.extend(sel.output.frame_ids);
        }
        let context = merge_context(&selected, n, self.k, self.cfg.uniform_frames);
        let answer = self.answer_context(store, qa, &context, &mut calls)?;
        Ok(Outcome {
            calls,
            selected: Some(selected),
            pool: Some(pool),
            context,
            answer,
            votes: None,
        })
    }

    fn similarity(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        strategy: Strategy,
        use_captions: bool,
    ) -> Result<Outcome, StrategyError> {
        let embedder = self
            .embedder
            .ok_or(StrategyError::MissingEmbedder(strategy))?;
        let n = store.frame_count();
        let candidates = uniform_sample(n, self.cfg.pool_size(strategy));
        let mut calls = Vec::new();
        let items: Vec<EmbedItem> = if use_captions {
            let captioned = ordered_map(candidates.len(), self.cfg.parallelism, |i| {
                self.caption(store, qa, candidates[i], CaptionStyle::Concise, None)
            });
            let mut items = Vec::with_capacity(candidates.len());
            for result in captioned {
                let (record, caption) = result?;
                calls.push(record);
                items.push(EmbedItem::Text(caption));
            }
            items
        } else {
            store
                .load_many(&candidates)?
                .into_iter()
                .map(EmbedItem::Image)
                .collect()
        };

        let question = embed(&[EmbedItem::Text(qa.question.clone())], embedder)?.remove(0);
        let mut scored = Vec::with_capacity(candidates.len());
        for (chunk_ids, chunk) in candidates
            .chunks(EMBED_CHUNK)
            .zip(items.chunks(EMBED_CHUNK))
        {
            let vectors = embed(chunk, embedder)?;
            scored.extend(chunk_ids.iter().zip(&vectors).map(|(&id, v)| Scored {
                id,
                score: question.cosine(v),
            }));
        }
        let keep = (self.k - self.cfg.uniform_frames) as usize;
        let selected = top_k_ascending(&scored, keep);
        let context = merge_context(&selected, n, self.k, self.cfg.uniform_frames);
        let answer = self.answer_context(store, qa, &context, &mut calls)?;
        Ok(Outcome {
            calls,
            selected: Some(selected),
            pool: Some(candidates.len() as u32),
            context,
            answer,
            votes: None,
        })
    }

    /// Answers within consecutive windows of `frames_per_segment` frames,
    /// then asks the model to reconcile the per-window answers.
    fn independent_segments(
        &self,
        store: &FrameStore,
        qa: &QARecord,
        high_confidence: bool,
    ) -> Result<Outcome, StrategyError> {
        let strategy = if high_confidence {
            Strategy::IndependentSegmentsHc
        } else {
            Strategy::IndependentSegments
        };
        if !qa.is_mcq() {
            return Err(StrategyError::Unsupported {
                strategy,
                reason: "aggregation needs answer options".into(),
            });
        }
        if self.cfg.frames_per_segment > self.k {
            return Err(StrategyError::InvalidConfig(format!(
                "window of {} frames exceeds the frame budget {}",
                self.cfg.frames_per_segment, self.k
            )));
        }
        let windows = fixed_windows(store.frame_count(), self.cfg.frames_per_segment)?;
        let results = ordered_map(windows.len(), self.cfg.parallelism, |i| {
            let seg = &windows[i];
            let ids: Vec<FrameId> = seg.ids().collect();
            let payloads = store.load_many(&ids)?;
            let parts = render_segment_answer_prompt(
                &payloads,
                seg,
                &qa.question,
                &qa.options,
                high_confidence,
            );
            let req = self.request(qa, CallRole::SegmentAnswer, parts);
            Ok::<_, StrategyError>(self.call(&req, ids, Some(seg.index)))
        });

        let mut calls = Vec::new();
        let mut answers = Vec::new();
        for (seg, result) in windows.iter().zip(results) {
            let (record, text) = result?;
            calls.push(record);
            let Ok(text) = text else { continue };
            let parsed = parse_final_answer(&text, qa.options.len(), AnswerDialect::DigitParen);
            if high_confidence && (is_abstention(&text) || parsed.parse_path == ParsePath::Unparsed)
            {
                continue;
            }
            answers.push(SegmentAnswer {
                segment: *seg,
                text,
            });
        }
        tracing::debug!(
            kept = answers.len(),
            windows = windows.len(),
            "aggregating segment answers"
        );

        let req = self.request(
            qa,
            CallRole::Aggregate,
            render_aggregate_prompt(&answers, &qa.question, &qa.options),
        );
        let (record, text) = self.call(&req, Vec::new(), None);
        calls.push(record);
        let answer = parse_final_answer(&text?, qa.options.len(), AnswerDialect::DigitParen);
        Ok(Outcome {
            calls,
            selected: None,
            pool: None,
            context: ContextSet::default(),
            answer,
            votes: None,
        })
    }

    /// Majority vote over answers from independently sampled frame sets.
    fn self_consistency(
        &self,
        store: &FrameStore,
        qa: &QARecord,
    ) -> Result<Outcome, StrategyError> {
        if !qa.is_mcq() {
            return Err(StrategyError::Unsupported {
                strategy: Strategy::SelfConsistency,
                reason: "majority voting needs answer options".into(),
            });
        }
        let n = store.frame_count();
        let draw = self.k.min(n) as usize;
        let runs = ordered_map(self.cfg.n_votes as usize, self.cfg.parallelism, |v| {
            let seed = vote_seed(self.cfg.rng_seed, v as u32);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut ids: Vec<FrameId> = rand::seq::index::sample(&mut rng, n as usize, draw)
                .into_iter()
                .map(|i| i as FrameId + 1)
                .collect();
            ids.sort_unstable();
            let answered = self.answer(
                store,
                qa,
                &ids,
                CallRole::Vote,
                Some((self.cfg.sc_temperature, seed)),
                Some(v as u32 + 1),
            )?;
            Ok::<_, StrategyError>((ids, answered))
        });

        let mut calls = Vec::new();
        let mut votes = Vec::new();
        let mut outputs = Vec::new();
        let mut last_error = None;
        for run in runs {
            let (ids, answered) = run?;
            calls.push(answered.record);
            match answered.result {
                Ok(out) => {
                    votes.push(out.choice_index);
                    outputs.push(Some((ids, out)));
                }
                Err(e) => {
                    votes.push(None);
                    outputs.push(None);
                    last_error = Some(e);
                }
            }
        }
        if outputs.iter().all(Option::is_none) {
            return Err(last_error.map_or_else(
                || StrategyError::InvalidConfig("no votes were cast".into()),
                StrategyError::from,
            ));
        }

        let winner = majority_vote(&votes).and_then(|tally| {
            outputs
                .iter()
                .flatten()
                .find(|(_, out)| out.choice_index == Some(tally.choice))
        });
        let (context, answer) = match winner {
            Some((ids, out)) => (ContextSet::from_uniform(ids), out.clone()),
            None => {
                let raw = outputs
                    .iter()
                    .flatten()
                    .next()
                    .map(|(_, out)| out.raw_text.clone())
                    .unwrap_or_default();
                (ContextSet::default(), AnswerOutput::unparsed(raw))
            }
        };
        Ok(Outcome {
            calls,
            selected: None,
            pool: None,
            context,
            answer,
            votes: Some(votes),
        })
    }
}
