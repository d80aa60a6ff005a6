import pandas as pd
from prettytable import PrettyTable

from chainsep.seplogger.logger import logger


def print_metrics(header: str, metric_dict: dict, summary: bool = False):
    t = PrettyTable([header, ''])
    for m_key, m_value in metric_dict.items():
        t.add_row([m_key, "%.4f" % m_value if isinstance(m_value, float) else m_value])
    if summary:
        return t
    logger.system_log(t)


def print_eval_table(results, summary: bool = False):
    if not results:
        return None
    k = len(results[0].per_source)
    t = PrettyTable(['Mixture'] + ['source {}'.format(i) for i in range(k)] + ['mean', 'input', 'improvement'])
    for result in results:
        t.add_row([result.name] + ["%.2f" % v for v in result.per_source] + [
            "%.2f" % result.mean_sdr,
            '' if result.input_sdr is None else "%.2f" % result.input_sdr,
            '' if result.improvement is None else "%.2f" % result.improvement])
    if summary:
        return t
    logger.system_line()
    logger.system_log("SDR PER MIXTURE ({})".format(results[0].metric))
    logger.system_line()
    logger.system_log(t)


def print_cdf_table(table: pd.DataFrame, summary: bool = False):
    t = PrettyTable(['SDR <= dB', 'fraction'])
    for threshold, fraction in zip(table['threshold_db'], table['fraction']):
        t.add_row(["%.1f" % threshold, "%.3f" % fraction])
    if summary:
        return t
    logger.debug(t)


def print_sweep_table(table: pd.DataFrame, summary: bool = False):
    t = PrettyTable(list(table.columns))
    for row in table.itertuples(index=False):
        t.add_row([("%.3f" % v) if isinstance(v, float) else v for v in row])
    if summary:
        return t
    logger.system_line()
    logger.system_log("STFT SWEEP")
    logger.system_line()
    logger.system_log(t)


def print_stage_report(report: dict, summary: bool = False):
    t = PrettyTable(['Stage', 'seconds'])
    for name, seconds in report.get('seconds', dict()).items():
        t.add_row([name, "%.3f" % seconds])
    if summary:
        return t
    logger.system_log(t)
