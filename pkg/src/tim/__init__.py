"""Relevance matching between need and item properties.

Submodules: ``core`` (hypothesis types and the brute-force enumerator),
``corpus`` (tokenizer and inverted index), ``mixture`` (2-Poisson fits),
``adhoc`` (document ranking), ``cf`` (item ranking from ratings),
``evaluation`` (TREC metrics) and ``cli``.
"""

from tim.core import (
    DescriptionDistribution,
    JointRelevanceTable,
    PriorTable,
    PropertyVector,
    SeekMatrix,
    enumerate_relevance_probability,
    single_property_score,
    strict_identity_joint,
)
from tim.corpus import Document, InvertedIndex, build_index, ingest_corpus, term_stats, tokenize
from tim.mixture import (
    CountHistogram,
    GibbsConfig,
    TwoPoissonParams,
    em_fit,
    eliteness_posterior,
    fit_many,
    gibbs_fit,
    init_params,
    poisson_pmf,
)
from tim.runs import RankedList

__version__ = "0.1.0"
