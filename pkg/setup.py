from setuptools import find_packages, setup

setup(
    name='tdi-sense',
    version='0.1.0',
    description='Frequency-estimation simulator and analytic bounds under time-domain imperfections',
    packages=find_packages(exclude=('tests',)),
    py_modules=['config', 'commands'],
    python_requires='>=3.9',
    install_requires=[
        'Flask==2.3.3',
        'Werkzeug==2.3.7',
        'click>=8.1',
        'python-dotenv==1.0.0',
        'numpy>=1.24',
        'scipy>=1.10',
    ],
    extras_require={
        'test': ['pytest==7.4.0', 'pytest-cov==4.1.0'],
    },
    entry_points={
        'console_scripts': [
            'tdi-sense=commands:cli',
        ],
    },
)
