"""
Mean teacher: an exponential moving average of the student used for pseudo-labels.
"""
import copy

import torch
import torch.nn as nn

from .exceptions import InvalidInputError, ShapeMismatchError


class TeacherModel(nn.Module):
    """Shadow copy of a student network that never receives gradients."""

    def __init__(self, student: nn.Module):
        super().__init__()
        self.model = copy.deepcopy(student)
        for param in self.model.parameters():
            param.requires_grad_(False)
        self.model.eval()

    def train(self, mode: bool = True) -> "TeacherModel":
        # Always predicts in evaluation mode
        super().train(mode)
        self.model.eval()
        return self

    @torch.no_grad()
    def forward(self, *args, **kwargs):
        return self.model(*args, **kwargs)

    @torch.no_grad()
    def update(self, student: nn.Module, alpha: float) -> None:
        """
        teacher <- alpha * teacher + (1 - alpha) * student, parameter by parameter.

        Floating-point buffers are copied from the student.

        Raises:
            ShapeMismatchError: If the parameter lists differ in names or shapes
        """
        if not 0.0 <= alpha <= 1.0:
            raise InvalidInputError(f"Teacher decay must lie in [0, 1], got {alpha}")
        student_params = dict(student.named_parameters())
        teacher_params = dict(self.model.named_parameters())
        if student_params.keys() != teacher_params.keys():
            missing = sorted(set(student_params) ^ set(teacher_params))
            raise ShapeMismatchError(f"Teacher and student parameters differ: {missing}")
        for name, param_t in teacher_params.items():
            param_s = student_params[name]
            if param_s.shape != param_t.shape:
                raise ShapeMismatchError(
                    f"Parameter {name}: teacher {tuple(param_t.shape)} vs student {tuple(param_s.shape)}"
                )
            param_t.mul_(alpha).add_(param_s.detach(), alpha=1.0 - alpha)

        student_buffers = dict(student.named_buffers())
        for name, buf_t in self.model.named_buffers():
            buf_s = student_buffers.get(name)
            if buf_s is not None and buf_s.shape == buf_t.shape:
                buf_t.copy_(buf_s)
