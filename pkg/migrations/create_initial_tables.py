"""Create experiment tables

Revision ID: 001
Revises: 
Create Date: 2026-10-18 10:00:00.000000

"""
from alembic import op
import sqlalchemy as sa

# revision identifiers
revision = '001'
down_revision = None
branch_labels = None
depends_on = None

def upgrade():
    op.create_table('experiment_runs',
        sa.Column('id', sa.Integer(), nullable=False),
        sa.Column('config_hash', sa.String(length=64), nullable=False),
        sa.Column('algorithm', sa.String(length=8), nullable=False),
        sa.Column('k', sa.Integer(), nullable=False),
        sa.Column('d', sa.Integer(), nullable=False),
        sa.Column('separation', sa.Float(), nullable=False),
        sa.Column('sigma', sa.Float(), nullable=False),
        sa.Column('n_steps', sa.Integer(), nullable=False),
        sa.Column('n_init', sa.Integer(), nullable=False),
        sa.Column('seed', sa.Integer(), nullable=False),
        sa.Column('init_mode', sa.String(length=16), nullable=False),
        sa.Column('eta', sa.Float(), nullable=False),
        sa.Column('final_error', sa.Float(), nullable=False),
        sa.Column('it_flag', sa.Boolean(), nullable=False),
        sa.Column('samples_consumed', sa.Integer(), nullable=False),
        sa.Column('wall_time_s', sa.Float(), nullable=False),
        sa.Column('status', sa.String(length=16), nullable=False),
        sa.Column('config_json', sa.Text(), nullable=False),
        sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.func.now(), nullable=True),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_experiment_runs_id'), 'experiment_runs', ['id'], unique=False)
    op.create_index(op.f('ix_experiment_runs_config_hash'), 'experiment_runs', ['config_hash'], unique=False)
    
    op.create_table('experiment_sweeps',
        sa.Column('id', sa.Integer(), nullable=False),
        sa.Column('axis', sa.String(length=4), nullable=False),
        sa.Column('repeats', sa.Integer(), nullable=False),
        sa.Column('values_json', sa.Text(), nullable=False),
        sa.Column('base_config_json', sa.Text(), nullable=False),
        sa.Column('rate_exponent', sa.Float(), nullable=True),
        sa.Column('created_at', sa.DateTime(timezone=True), server_default=sa.func.now(), nullable=True),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_experiment_sweeps_id'), 'experiment_sweeps', ['id'], unique=False)
    
    op.create_table('sweep_cells',
        sa.Column('id', sa.Integer(), nullable=False),
        sa.Column('sweep_id', sa.Integer(), nullable=False),
        sa.Column('cell_index', sa.Integer(), nullable=False),
        sa.Column('value', sa.Float(), nullable=False),
        sa.Column('repeat', sa.Integer(), nullable=False),
        sa.Column('seed', sa.Integer(), nullable=False),
        sa.Column('status', sa.String(length=16), nullable=False),
        sa.Column('final_error', sa.Float(), nullable=True),
        sa.Column('it_flag', sa.Boolean(), nullable=True),
        sa.Column('error_code', sa.String(length=32), nullable=True),
        sa.ForeignKeyConstraint(['sweep_id'], ['experiment_sweeps.id'], ),
        sa.PrimaryKeyConstraint('id')
    )
    op.create_index(op.f('ix_sweep_cells_id'), 'sweep_cells', ['id'], unique=False)
    op.create_index('idx_sweep_cells_sweep_id_cell_index', 'sweep_cells', ['sweep_id', 'cell_index'], unique=False)

def downgrade():
    op.drop_index('idx_sweep_cells_sweep_id_cell_index', table_name='sweep_cells')
    op.drop_index(op.f('ix_sweep_cells_id'), table_name='sweep_cells')
    op.drop_table('sweep_cells')
    op.drop_index(op.f('ix_experiment_sweeps_id'), table_name='experiment_sweeps')
    op.drop_table('experiment_sweeps')
    op.drop_index(op.f('ix_experiment_runs_config_hash'), table_name='experiment_runs')
    op.drop_index(op.f('ix_experiment_runs_id'), table_name='experiment_runs')
    op.drop_table('experiment_runs')
