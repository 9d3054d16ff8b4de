from sqlalchemy import Boolean, Column, DateTime, Float, ForeignKey, Index, Integer, String, Text
from sqlalchemy.orm import relationship
from sqlalchemy.sql import func
from app.db.database import Base

class ExperimentRun(Base):
    __tablename__ = "experiment_runs"
    
    id = Column(Integer, primary_key=True, index=True)
    config_hash = Column(String(64), nullable=False, index=True)
    algorithm = Column(String(8), nullable=False)
    k = Column(Integer, nullable=False)
    d = Column(Integer, nullable=False)
    separation = Column(Float, nullable=False)  # C
    sigma = Column(Float, nullable=False)
    n_steps = Column(Integer, nullable=False)
    n_init = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    init_mode = Column(String(16), nullable=False)
    eta = Column(Float, nullable=False)
    final_error = Column(Float, nullable=False)
    it_flag = Column(Boolean, nullable=False)
    samples_consumed = Column(Integer, nullable=False)
    wall_time_s = Column(Float, nullable=False)
    status = Column(String(16), nullable=False, default="ok")
    config_json = Column(Text, nullable=False)
    created_at = Column(DateTime(timezone=True), server_default=func.now())

class ExperimentSweep(Base):
    __tablename__ = "experiment_sweeps"
    
    id = Column(Integer, primary_key=True, index=True)
    axis = Column(String(4), nullable=False)
    repeats = Column(Integer, nullable=False)
    values_json = Column(Text, nullable=False)
    base_config_json = Column(Text, nullable=False)
    rate_exponent = Column(Float)
    created_at = Column(DateTime(timezone=True), server_default=func.now())
    
    cells = relationship("SweepCell", back_populates="sweep", cascade="all, delete-orphan",
                         order_by="SweepCell.cell_index")

class SweepCell(Base):
    __tablename__ = "sweep_cells"
    
    id = Column(Integer, primary_key=True, index=True)
    sweep_id = Column(Integer, ForeignKey("experiment_sweeps.id"), nullable=False)
    cell_index = Column(Integer, nullable=False)
    value = Column(Float, nullable=False)
    repeat = Column(Integer, nullable=False)
    seed = Column(Integer, nullable=False)
    status = Column(String(16), nullable=False)
    final_error = Column(Float)
    it_flag = Column(Boolean)
    error_code = Column(String(32))
    
    sweep = relationship("ExperimentSweep", back_populates="cells")
    
    # Index for reading a sweep's cells in order
    __table_args__ = (
        Index('idx_sweep_cells_sweep_id_cell_index', 'sweep_id', 'cell_index'),
    )
