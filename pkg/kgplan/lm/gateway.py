"""
The single choke point for language model calls: every completion passes through :meth:`LmGateway.complete`, which
enforces the token budget, retries transient backend failures, and appends to the transcript.

:author: Doug Skrypa
"""

import logging
import time
from typing import Optional

from ..core.exceptions import BackendError, TokenBudgetExceeded
from .backends import LmBackend, Completion
from .prompts import PromptBundle
from .transcript import LmTranscript, TranscriptEntry

__all__ = ['LmGateway']
log = logging.getLogger(__name__)


class LmGateway:
    def __init__(
        self,
        backend: LmBackend,
        transcript: Optional[LmTranscript] = None,
        token_budget: Optional[int] = None,
        backend_retries: int = 2,
        retry_delay: float = 0.5,
    ):
        self.backend = backend
        self.transcript = transcript or LmTranscript(backend.backend_id)
        self.token_budget = token_budget
        self.backend_retries = backend_retries
        self.retry_delay = retry_delay
        self.label: Optional[str] = None

    def __repr__(self):
        return f'<{self.__class__.__name__}[{self.backend.backend_id}]({self.transcript!r})>'

    def complete(self, bundle: PromptBundle, label: Optional[str] = None) -> Completion:
        if self.token_budget is not None and (used := self.transcript.total_tokens) >= self.token_budget:
            raise TokenBudgetExceeded(used, self.token_budget)

        log.debug(f'Prompting template={bundle.template_id} attempt={bundle.attempt}:\n{bundle.rendered}')
        completion = self._call(bundle)
        log.debug(f'Completion for template={bundle.template_id}:\n{completion.text}')
        self.transcript.append(
            TranscriptEntry(
                bundle.template_id,
                bundle.rendered,
                completion.text,
                completion.input_tokens,
                completion.output_tokens,
                bundle.attempt,
                label or self.label,
            )
        )
        if self.token_budget is not None and self.transcript.total_tokens > 0.9 * self.token_budget:
            log.warning(f'Token budget nearly exhausted: {self.transcript.total_tokens:,d} / {self.token_budget:,d}')
        return completion

    def _call(self, bundle: PromptBundle) -> Completion:
        attempt = 0
        while True:
            try:
                return self.backend.complete(bundle)
            except BackendError as e:
                if attempt >= self.backend_retries:
                    raise
                attempt += 1
                backend_id, retries = self.backend.backend_id, self.backend_retries
                log.warning(f'{backend_id} backend failed ({e}); retrying ({attempt}/{retries})')
                time.sleep(self.retry_delay * attempt)
