from .cfg import build_cfg, cfg_from_source
from .generate import CorpusError, CorpusGraph, build_graphs, generate_corpus, label_pairs
from .mutate import MiniProgram, MutationError, MutationOp, choose_mutations, load_programs, mutable_sites, mutate
from .parser import ParseError, parse
from .programs import builtin_programs
