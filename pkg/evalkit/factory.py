"""Registry mapping method labels to estimator classes."""

from dataclasses import dataclass, field
from typing import Any, ClassVar, Optional

from common.errors import ConfigError
from evalkit.base_estimator import BaseEstimator, EvalContext
from evalkit.estimators import MeanEstimator, NetworkEstimator, SitpEstimator


@dataclass
class EstimatorRegistration:
    """Class, CSV column slug and constructor options of one method."""

    estimator_class: type[BaseEstimator]
    column: str
    options: dict[str, Any] = field(default_factory=dict)


class EstimatorFactory:
    """Creates estimator instances by method label, in registration order."""

    _registry: ClassVar[dict[str, EstimatorRegistration]] = {}

    @classmethod
    def register(
        cls, methods: dict[str, tuple[type[BaseEstimator], str, dict[str, Any]]]
    ) -> None:
        """Register ``{label: (class, column, options)}`` entries."""
        for label, entry in methods.items():
            if not (isinstance(entry, tuple) and len(entry) == 3):
                raise ValueError(
                    "Each method must be a tuple (estimator_class, column, options)"
                )
            estimator_class, column, options = entry
            cls._registry[label] = EstimatorRegistration(
                estimator_class, column, dict(options)
            )

    @classmethod
    def methods(cls) -> list[str]:
        """Registered labels."""
        return list(cls._registry)

    @classmethod
    def column(cls, label: str) -> str:
        """CSV column slug of ``label``."""
        return cls._lookup(label).column

    @classmethod
    def variant(cls, label: str) -> Optional[str]:
        """Network variant a method runs, or None for the reference methods."""
        return cls._lookup(label).options.get("variant")

    @classmethod
    def create_estimators(
        cls, labels: list[str], context: EvalContext
    ) -> list[BaseEstimator]:
        """Instantiate the estimators for ``labels``.

        Raises:
            ConfigError: If a label is not registered.
            MissingArtifactError: If a network method has no checkpoint.
        """
        estimators = []
        for label in labels:
            registration = cls._lookup(label)
            estimators.append(
                registration.estimator_class(
                    method=label,
                    column=registration.column,
                    context=context,
                    **registration.options,
                )
            )
        return estimators

    @classmethod
    def _lookup(cls, label: str) -> EstimatorRegistration:
        if label not in cls._registry:
            raise ConfigError(
                f"No estimator registered for method '{label}'. "
                f"Available methods: {list(cls._registry)}"
            )
        return cls._registry[label]


EstimatorFactory.register(
    {
        "SA-MDF-CNN": (NetworkEstimator, "sa_mdf_cnn", {"variant": "attention"}),
        "CNN": (NetworkEstimator, "cnn", {"variant": "cnn"}),
        "SITP": (SitpEstimator, "sitp", {}),
        "MEAN": (MeanEstimator, "mean", {}),
    }
)
