"""
Training engine: one optimization step of the full objective, the fit loop,
periodic validation and checkpointing.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import torch
from tqdm import tqdm

from ..config import TrainConfig, config_hash
from ..data.batching import CropBatcher
from ..data.dataset import SegmentationDataset
from ..evaluation import evaluate
from ..exceptions import InvalidInputError, NonFiniteError, TrainingAbortedError
from ..graph.adapter import DomainInputs, GraphMatchingAdapter, GraphOutput
from ..graph.sampling import pixel_confidence_entropy
from ..model import SegmentationModel, SegmentationOutput, parameter_summary
from ..models import LossBreakdown, MetricsReport
from ..paths import PathLike, atomic_write_text, ensure_directory
from ..self_training import dacs_mix, pseudo_label, rare_class_sample
from ..teacher import TeacherModel
from .checkpoint import load_checkpoint, save_checkpoint
from .losses import mixup_loss, segmentation_loss, total_loss
from .metric_log import MetricLog, MemoryMetricLog
from .schedule import lr_schedule

logger = logging.getLogger(__name__)

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def downsample_labels(labels: torch.Tensor, size) -> torch.Tensor:
    """Nearest-neighbour label map resize, (B, H, W) -> (B, h, w)."""
    resized = torch.nn.functional.interpolate(labels.unsqueeze(1).float(), size=size, mode="nearest")
    return resized.squeeze(1).long()


def graph_inputs(output: SegmentationOutput, labels: torch.Tensor) -> DomainInputs:
    """Flatten one domain's features, labels and prediction statistics for node sampling."""
    with torch.no_grad():
        confidence, entropy = pixel_confidence_entropy(output.feature_logits.detach())
        predicted = output.feature_logits.argmax(dim=1)
    small = downsample_labels(labels, output.feature_size)
    return DomainInputs(
        features=output.features.reshape(-1, output.features.shape[-1]),
        labels=small.reshape(-1),
        confidence=confidence.reshape(-1),
        entropy=entropy.reshape(-1),
        predicted=predicted.reshape(-1),
    )


class Trainer:
    """
    Owns all mutable training state: student, teacher, graph adapter (with its memory
    banks), optimizer, step counter and random generators.

    Two generators keep randomness reproducible: `data_generator` drives crops and
    sampling, `train_generator` drives class mixing and node noise. Dropout draws from
    the global torch RNG, whose state is checkpointed as well.
    """

    def __init__(
        self,
        config: TrainConfig,
        source: SegmentationDataset,
        target: SegmentationDataset,
        validation: Optional[SegmentationDataset] = None,
        out_dir: Optional[PathLike] = None,
        metric_log: Optional[MetricLog] = None,
    ):
        if source.meta.class_names != target.meta.class_names:
            raise InvalidInputError(
                f"Source classes {source.meta.class_names} differ from target classes {target.meta.class_names}"
            )
        self.config = config
        self.config_hash = config_hash(config)
        self.dtype = DTYPES[config.dtype]
        self.num_base = source.num_base
        self.class_names = source.meta.class_names
        self.source = source
        self.target = target
        self.validation = validation
        self.out_dir = ensure_directory(out_dir) if out_dir is not None else None
        self.metric_log = metric_log if metric_log is not None else MemoryMetricLog()

        torch.manual_seed(config.seed)
        self.model = SegmentationModel.from_config(config, self.num_base).to(self.dtype)
        self.adapter = GraphMatchingAdapter.from_config(config, self.num_base).to(self.dtype)
        self.teacher = TeacherModel(self.model)

        groups = self.model.param_groups()
        self.optimizer = torch.optim.AdamW(
            [
                {"params": groups["encoder"], "lr_mult": 1.0},
                {"params": groups["decoder"] + list(self.adapter.parameters()), "lr_mult": config.decoder_lr_mult},
            ],
            lr=config.lr,
            betas=(0.9, 0.999),
            weight_decay=config.weight_decay,
        )

        self.data_generator = torch.Generator().manual_seed(config.seed)
        self.train_generator = torch.Generator().manual_seed(config.seed + 1)
        weights = None
        if config.rcs_enabled:
            weights = rare_class_sample(source.class_pixel_counts(), config.rcs_temperature, config.scaled_min_pixels)
        self.source_batches = CropBatcher(
            source, config.crop, config.batch_size, self.data_generator, weights, config.hflip, self.dtype,
        )
        self.target_batches = CropBatcher(
            target, config.crop, config.batch_size, self.data_generator, None, config.hflip, self.dtype,
        )

        self.step = 0
        self.consecutive_skips = 0
        self.best_miou = -1.0
        self.last_graph: Optional[GraphOutput] = None

    # ============ Single step ============

    def _set_lr(self) -> float:
        lr = lr_schedule(self.step, self.config.warmup_steps, self.config.total_steps, self.config.lr)
        for group in self.optimizer.param_groups:
            group["lr"] = lr * group["lr_mult"]
        return lr

    def _reject(self, error: NonFiniteError, lr: float, train_state: torch.Tensor, torch_state: torch.Tensor) -> LossBreakdown:
        self.train_generator.set_state(train_state)
        torch.set_rng_state(torch_state)
        self.optimizer.zero_grad(set_to_none=True)
        self.consecutive_skips += 1
        logger.warning(
            "Step %d rejected (%d consecutive): %s", self.step + 1, self.consecutive_skips, error,
        )
        if self.consecutive_skips >= self.config.max_skips:
            raise TrainingAbortedError(
                f"Aborting after {self.consecutive_skips} consecutive non-finite steps at step {self.step}"
            )
        nan = float("nan")
        return LossBreakdown(step=self.step, lr=lr, seg=nan, mixup=nan, total=nan, skipped=True)

    def graph_step(self, source_out: SegmentationOutput, source_labels: torch.Tensor,
                   target_images: torch.Tensor, target_labels: torch.Tensor) -> Optional[GraphOutput]:
        """Graph branch on source-only and target-only student features."""
        target_out = self.model(target_images)
        return self.adapter(
            graph_inputs(source_out, source_labels),
            graph_inputs(target_out, target_labels),
            self.train_generator,
        )

    @torch.no_grad()
    def graph_snapshot(self, source_batch, target_batch) -> Optional[GraphOutput]:
        """Graph branch in evaluation mode on one batch; memory is not updated."""
        was_training = self.model.training
        self.model.eval()
        self.adapter.eval()
        try:
            source_images, source_labels = source_batch
            target_images = target_batch[0]
            pseudo = pseudo_label(
                self.teacher(target_images).logits, self.num_base, self.config.pseudo_threshold,
                self.config.border_top, self.config.border_bottom,
            )
            return self.graph_step(self.model(source_images), source_labels, target_images, pseudo.labels)
        finally:
            self.model.train(was_training)
            self.adapter.train(was_training)

    def train_step(self, source_batch, target_batch) -> LossBreakdown:
        """
        One step of seg + mixup + gamma * graph.

        Target ground truth in `target_batch` is never read. A non-finite loss rejects
        the step and leaves the state unchanged.

        Args:
            source_batch: (images, labels) source crops
            target_batch: (images, labels) target crops

        Returns:
            LossBreakdown of the step
        """
        source_images, source_labels = source_batch
        target_images = target_batch[0]
        if source_images.shape != target_images.shape:
            raise InvalidInputError(
                f"Source crops {tuple(source_images.shape)} and target crops {tuple(target_images.shape)} differ"
            )
        config = self.config
        self.model.train()
        self.adapter.train()
        train_state = self.train_generator.get_state()
        torch_state = torch.get_rng_state()
        lr = self._set_lr()
        self.optimizer.zero_grad(set_to_none=True)

        try:
            source_out = self.model(source_images)
            seg = segmentation_loss(source_out.logits, source_labels)

            pseudo = pseudo_label(
                self.teacher(target_images).logits, self.num_base, config.pseudo_threshold,
                config.border_top, config.border_bottom,
            )
            mix = dacs_mix(source_images, source_labels, target_images, pseudo.labels, pseudo.weight,
                           self.train_generator)
            mixup = mixup_loss(self.model(mix.images).logits, mix.labels, mix.pixel_weight)

            graph_out = None
            graph = seg.new_zeros(())
            if config.gamma > 0 and self.step % config.graph_stride == 0:
                graph_out = self.graph_step(source_out, source_labels, target_images, pseudo.labels)
                if graph_out is not None:
                    graph = graph_out.loss.total
            loss = total_loss(seg, mixup, graph, config.gamma)
        except NonFiniteError as e:
            return self._reject(e, lr, train_state, torch_state)

        loss.total.backward()
        self.optimizer.step()
        self.teacher.update(self.model, config.alpha_teacher)
        if graph_out is not None:
            self.adapter.commit(graph_out)
        self.last_graph = graph_out
        self.step += 1
        self.consecutive_skips = 0

        seg_v, mix_v, graph_v = float(seg), float(mixup), float(graph)
        terms = graph_out.loss if graph_out is not None else None
        return LossBreakdown(
            step=self.step,
            lr=lr,
            seg=seg_v,
            mixup=mix_v,
            graph_match=float(terms.match) if terms else 0.0,
            graph_edge=float(terms.edge) if terms else 0.0,
            graph_unknown=float(terms.unknown) if terms else 0.0,
            graph=graph_v,
            total=seg_v + mix_v + config.gamma * graph_v,
        )

    # ============ Loop ============

    def validate(self) -> Optional[MetricsReport]:
        if self.validation is None:
            return None
        report = evaluate(self.model, self.validation, step=self.step, config_hash=self.config_hash)
        logger.info(
            "Validation at step %d: mIoU %.2f common %.2f private %.2f H %.2f",
            self.step, report.miou, report.common, report.private, report.h_score,
        )
        return report

    def fit(self, steps: Optional[int] = None, progress: bool = True) -> List[LossBreakdown]:
        """
        Train until `total_steps`, or for `steps` more accepted steps.

        Writes per-step rows to the metric log; with an output directory also
        train_summary.json, last.pt and best.pt (highest validation mIoU).
        """
        end = self.config.total_steps if steps is None else min(self.step + steps, self.config.total_steps)
        self._write_summary()
        history: List[LossBreakdown] = []
        bar = tqdm(total=end - self.step, desc="train", disable=not progress, leave=False)
        try:
            while self.step < end:
                entry = self.train_step(self.source_batches.next_batch(), self.target_batches.next_batch())
                self.metric_log.append(entry)
                history.append(entry)
                if entry.skipped:
                    continue
                bar.update(1)
                bar.set_postfix(loss=f"{entry.total:.4f}")
                if self.step % self.config.log_interval == 0:
                    logger.info(
                        "step %d lr %.3g seg %.4f mixup %.4f graph %.4f total %.4f",
                        self.step, entry.lr, entry.seg, entry.mixup, entry.graph, entry.total,
                    )
                if self.config.eval_interval and self.step % self.config.eval_interval == 0:
                    self._checkpoint_after_eval(self.validate())
        finally:
            bar.close()
        if self.out_dir is not None:
            self.save(self.out_dir / "last.pt")
            self._write_summary()
        return history

    def _checkpoint_after_eval(self, report: Optional[MetricsReport]) -> None:
        if self.out_dir is None:
            return
        if report is not None and report.miou > self.best_miou:
            self.best_miou = report.miou
            self.save(self.out_dir / "best.pt")
        self.save(self.out_dir / "last.pt")

    def _write_summary(self) -> None:
        if self.out_dir is None:
            return
        summary = {
            "config_hash": self.config_hash,
            "config": self.config.model_dump(mode="json"),
            "parameters": parameter_summary(self.model, self.adapter),
            "class_names": self.class_names,
            "source_images": len(self.source),
            "target_images": len(self.target),
            "step": self.step,
            "best_miou": self.best_miou if self.best_miou >= 0 else None,
        }
        atomic_write_text(self.out_dir / "train_summary.json", json.dumps(summary, indent=2) + "\n")

    # ============ Checkpoints ============

    def state_dict(self) -> Dict[str, Any]:
        return {
            "config_hash": self.config_hash,
            "config": self.config.model_dump(mode="json"),
            "step": self.step,
            "num_base": self.num_base,
            "class_names": list(self.class_names),
            "model": self.model.state_dict(),
            "teacher": self.teacher.state_dict(),
            "adapter": self.adapter.state_dict(),
            "optimizer": self.optimizer.state_dict(),
            "rng": {
                "data": self.data_generator.get_state(),
                "train": self.train_generator.get_state(),
                "torch": torch.get_rng_state(),
            },
            "consecutive_skips": self.consecutive_skips,
            "best_miou": self.best_miou,
        }

    def load_state_dict(self, state: Dict[str, Any]) -> None:
        self.model.load_state_dict(state["model"])
        self.teacher.load_state_dict(state["teacher"])
        self.adapter.load_state_dict(state["adapter"])
        self.optimizer.load_state_dict(state["optimizer"])
        self.data_generator.set_state(state["rng"]["data"])
        self.train_generator.set_state(state["rng"]["train"])
        torch.set_rng_state(state["rng"]["torch"])
        self.step = int(state["step"])
        self.consecutive_skips = int(state.get("consecutive_skips", 0))
        self.best_miou = float(state.get("best_miou", -1.0))

    def save(self, path: PathLike) -> Path:
        save_checkpoint(path, self.state_dict())
        return Path(path)

    def resume(self, path: PathLike) -> None:
        """Restore a checkpoint written with the same configuration."""
        state = load_checkpoint(path, expected=self.config)
        if state["num_base"] != self.num_base:
            raise InvalidInputError(
                f"Checkpoint has {state['num_base']} base classes, datasets have {self.num_base}"
            )
        self.load_state_dict(state)
        logger.info("Resumed from %s at step %d", path, self.step)


def restore_model(state: Dict[str, Any], config: TrainConfig) -> SegmentationModel:
    """Student network from a loaded checkpoint, in evaluation mode."""
    model = SegmentationModel.from_config(config, int(state["num_base"])).to(DTYPES[config.dtype])
    model.load_state_dict(state["model"])
    return model.eval()

