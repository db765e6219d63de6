"""SQLite/SQLAlchemy store for simulation results.

One ``SimulationRun`` row per scenario run, holding the parameters and the
summary statistics, with one ``Replicate`` row per annealing chain.
"""
import functools
import json
import logging

from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Integer, String, Text, create_engine, func, select
from sqlalchemy.orm import declarative_base, relationship, sessionmaker
from sqlalchemy.pool import StaticPool

from .config import database_url

logger = logging.getLogger(__name__)

Base = declarative_base()


class SimulationRun(Base):
    __tablename__ = 'simulation_run'

    id = Column(Integer, primary_key=True)
    raters = Column(Integer, nullable=False)
    levels = Column(Integer, nullable=False)
    size = Column(Integer, nullable=False)
    scheme = Column(String(200), nullable=False)
    homogeneous = Column(Boolean, nullable=False)
    seed = Column(Integer, nullable=False)
    mean = Column(Float, nullable=False)
    sd = Column(Float, nullable=False)
    q99 = Column(Integer, nullable=False)
    resampled = Column(Integer, default=0)
    scenario_json = Column(Text, nullable=False)  # full scenario, including anneal overrides
    created_at = Column(DateTime, default=func.current_timestamp())
    replicates = relationship('Replicate', backref='run', lazy=True, cascade='all, delete-orphan',
                              order_by='Replicate.index')

    def to_dict(self):
        return {
            'id': self.id,
            'raters': self.raters,
            'weight': self.scheme,
            'k': self.levels,
            'N': self.size,
            'homogeneous': self.homogeneous,
            'seed': self.seed,
            'replicates': len(self.replicates),
            'mean': self.mean,
            'sd': self.sd,
            'q99': self.q99,
            'resampled': self.resampled,
            'created_at': self.created_at.isoformat() if self.created_at else None,
        }


class Replicate(Base):
    __tablename__ = 'replicate'

    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey('simulation_run.id'), nullable=False)
    index = Column(Integer, nullable=False)
    steps_total = Column(Integer, nullable=False)


class ResultStore:
    """Thin wrapper holding an engine and a session factory."""

    def __init__(self, url=None):
        url = url or database_url()
        if ':memory:' in url:
            # one shared connection, otherwise every session sees an empty database
            self.engine = create_engine(url, poolclass=StaticPool, connect_args={'check_same_thread': False})
        else:
            self.engine = create_engine(url)
        Base.metadata.create_all(self.engine)
        self.Session = sessionmaker(bind=self.engine, expire_on_commit=False)
        logger.debug('Result store at %s', url)

    def save_run(self, scenario, stats):
        """
        Record a finished scenario.

        Args:
            scenario: simstudy.Scenario
            stats: simstudy.ScenarioStats

        Returns:
            id of the new run
        """
        with self.Session() as session:
            run = SimulationRun(
                raters=scenario.raters,
                levels=scenario.levels,
                size=scenario.size,
                scheme=scenario.scheme,
                homogeneous=scenario.homogeneous,
                seed=scenario.seed,
                mean=stats.mean,
                sd=stats.sd,
                q99=stats.q99,
                resampled=stats.resampled,
                scenario_json=json.dumps(scenario.to_dict()),
            )
            session.add(run)
            session.flush()  # Get the run ID

            for index, steps in enumerate(stats.times):
                session.add(Replicate(run_id=run.id, index=index, steps_total=steps))

            session.commit()
            logger.info('Stored run %s (%s replicates)', run.id, len(stats.times))
            return run.id

    def list_runs(self, limit=None):
        """Stored runs, newest first, as JSON-ready dicts."""
        with self.Session() as session:
            query = select(SimulationRun).order_by(SimulationRun.id.desc())
            if limit:
                query = query.limit(limit)
            return [run.to_dict() for run in session.scalars(query)]

    def replicate_times(self, run_id):
        with self.Session() as session:
            query = select(Replicate.steps_total).where(Replicate.run_id == run_id).order_by(Replicate.index)
            return list(session.scalars(query))

    def delete_run(self, run_id):
        """Remove a run and its replicates; returns False if it did not exist."""
        with self.Session() as session:
            run = session.get(SimulationRun, run_id)
            if run is None:
                return False
            session.delete(run)
            session.commit()
            return True


@functools.lru_cache(maxsize=None)
def default_store():
    """The process-wide store for ``DATABASE_URL``."""
    return ResultStore()
