import os
from dotenv import load_dotenv

load_dotenv()


class Settings:
    """Configurações globais do toolkit (sobrescrevíveis por variáveis de ambiente)"""
    APP_NAME = "liouvillian-nhkpm"
    APP_VERSION = "1.0.0"

    # Versão do schema dos arquivos de configuração de execução
    SCHEMA_VERSION = 1

    # Diretório de saída (a variável NHKPM_OUTPUT_DIR tem precedência sobre o config)
    OUTPUT_DIR = os.getenv('NHKPM_OUTPUT_DIR')
    REPORT_NAME = "report.json"

    # Limites de recursos
    DENSE_LIMIT = int(os.getenv('NHKPM_DENSE_LIMIT', '4096'))
    MAX_INTERMEDIATE_BOND = int(os.getenv('NHKPM_MAX_INTERMEDIATE_BOND', '4096'))
    RK4_MAX_SPINS = 7
    DAMPING_MAX_SPINS = 64

    # MPS
    DEFAULT_MAX_BOND = 128
    DEFAULT_CUTOFF = 1e-8

    # Paralelismo
    DEFAULT_WORKERS = int(os.getenv('NHKPM_WORKERS', '1'))
    CHUNK_SIZE = 512  # nós da grade por tarefa no backend denso

    # Tolerâncias numéricas
    BIORTHO_TOLERANCE = 1e-8
    DEGENERACY_GAP = 1e-10
    SYMMETRY_TOLERANCE = 1e-6
    WEIGHT_THRESHOLD = 1e-3
    IMAG_RESIDUE_TOLERANCE = 1e-3
    SCALE_MARGIN = 1.1
    MIN_MOMENTS = 16

    # Janela de tempo padrão
    DEFAULT_T_MAX = 20.0
    DEFAULT_N_SAMPLES = 201

    # Configurações de logging
    LOG_LEVEL = os.getenv('NHKPM_LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('NHKPM_LOG_FILE', 'nhkpm.log')

    @classmethod
    def output_dir(cls, configured: str) -> str:
        """Retorna o diretório de saída efetivo"""
        return os.getenv('NHKPM_OUTPUT_DIR', cls.OUTPUT_DIR) or configured
