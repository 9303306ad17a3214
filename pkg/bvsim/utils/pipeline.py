import os
from tqdm import tqdm
from datetime import datetime
from joblib import Parallel, delayed
from bvsim import base


def _get_datestr():
    return datetime.now().strftime('%Y.%m.%d.%H.%M.%S')


def hyperparam_space(search_space: base.List[dict], hyper_parameters: base.List[base.Tuple]
                     ) -> base.List[dict]:
    """
    Create all parameter combinations to run.

    :search_space (base.List[dict]): List of dictionaries with fixed values, e.g. [{}].
    :hyper_parameters (base.List[tuple]): (name, values) pairs, expanded as a cartesian product.
    :returns search_space (base.List[dict]): One dictionary per combination.
    """
    for param_name, param_space in hyper_parameters:
        additions = []
        for comb_dict in search_space:
            for param in param_space:
                additions.append({**comb_dict, **{param_name: param}})
        search_space = additions
    return search_space


def parallel_map(func: base.Callable, items: base.Sequence, n_jobs: int = 1, desc: str = None) -> base.List:
    """
    Apply func to every item, keeping the input order.

    Workers run as threads: compiled expressions are closures that do not pickle.

    :func (base.Callable): Function of one item.
    :items (base.Sequence): The work items.
    :n_jobs (int, default = 1): Number of joblib workers. 1 runs sequentially with a progress bar.
    :desc (str, default = None): Progress bar label.
    :returns (base.List): Results in the order of items.
    """
    items = list(items)
    if n_jobs == 1:
        bar = tqdm(items, desc = desc, leave = False, disable = os.environ.get('TQDM_DISABLE', False))
        return [func(item) for item in bar]
    return Parallel(n_jobs = n_jobs, prefer = 'threads')(delayed(func)(item) for item in items)
