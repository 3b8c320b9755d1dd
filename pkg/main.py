from api.router.spectrum import router as spectrum_router
from api.router.dynamics import router as dynamics_router
from api.router.fitting import router as fitting_router
from api.router.oracle import router as oracle_router
from api.router.figures import router as figures_router
from api.router.base import StageError, apply_overrides
from api.dependencies import cleanup_instances, get_decay_service
from api.models import RunConfig, StageResponse
from core.artifacts import to_jsonable
from core.errors import DecayError
from datetime import datetime
from pathlib import Path
from pydantic import ValidationError
from typing import List, Optional
import argparse
import json
import logging
import sys
import time
from dotenv import load_dotenv
import os

load_dotenv()

# 配置日志
logging.basicConfig(
    level=os.getenv("DECAY_LOG_LEVEL", "INFO").upper(),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)

ROUTERS = [spectrum_router, dynamics_router, fitting_router, oracle_router, figures_router]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="resonant-decay",
        description="共振态展开的量子衰变计算：极点、系数、生存概率、短时分析与直接传播对照",
    )
    parser.add_argument("--config", help="运行配置 JSON；缺省时使用默认双势垒设置")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--threads", type=int, default=None, help="线程数")
    parser.add_argument("--seed", type=int, default=0, help="随机种子（仅用于噪声注入）")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for router in ROUTERS:
        router.register(subparsers)
    return parser


def load_config(path: Optional[str]) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig.model_validate_json(Path(path).read_text(encoding="utf-8"))


def emit(response: StageResponse) -> None:
    print(json.dumps(to_jsonable(response.model_dump(mode="python")), ensure_ascii=False, indent=2, default=str))


def failure(stage: str, message: str, error: str, exit_code: int) -> int:
    emit(
        StageResponse(
            success=False,
            message=message,
            stage=stage,
            data={"error": error, "exit_code": exit_code},
            timestamp=datetime.now(),
        )
    )
    return exit_code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    start_time = time.time()
    logger.info(f"子命令 {args.command} 开始")
    try:
        config = apply_overrides(load_config(args.config), args)
        response = args.handler(args, config, get_decay_service())
        emit(response)
        return 0
    except ValidationError as e:
        logger.error(f"配置校验失败: {e}")
        return failure(args.command, str(e), "ValidationError", 2)
    except StageError as e:
        return failure(e.result.get("stage", args.command), e.result["message"], e.result.get("error", ""), e.exit_code)
    except DecayError as e:
        logger.error(f"[{e.stage or args.command}] {type(e).__name__}: {e.message}")
        return failure(e.stage or args.command, e.message, type(e).__name__, e.exit_code)
    except OSError as e:
        logger.error(f"文件读写失败: {e}")
        return failure(args.command, str(e), type(e).__name__, 2)
    except Exception as e:
        logger.error(f"Unhandled exception in {args.command}: {e}", exc_info=True)
        return failure(args.command, str(e), type(e).__name__, 3)
    finally:
        logger.info(f"子命令 {args.command} 结束，用时 {time.time() - start_time:.2f}s")
        cleanup_instances()


if __name__ == "__main__":
    sys.exit(main())
